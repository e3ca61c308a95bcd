#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>

#include <Eigen/Dense>

namespace saltgov {

// 64-bit FNV-1a, used for provenance tags and artifact fingerprints.
class Fnv1a {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void text(std::string_view s) {
        bytes(s.data(), s.size());
        const char sep = '\0';
        bytes(&sep, 1);
    }
    void value(double v) { bytes(&v, sizeof v); }
    void value(std::int64_t v) { bytes(&v, sizeof v); }
    void matrix(const Eigen::MatrixXd& m) {
        value(static_cast<std::int64_t>(m.rows()));
        value(static_cast<std::int64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) value(m(i, j));
    }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace saltgov
