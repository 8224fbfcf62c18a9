#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace oudiff {

enum class Errc {
    invalid_argument,
    unsupported_shape,
    singular_matrix,
    not_positive_definite,
    degenerate_drift,
    unstable_at_time,
    degenerate_rate,
    no_collapse,
    cgf_domain,
    kernel_degenerate,
    undefined_label,
    io_failure,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what,
          double at_time = std::numeric_limits<double>::quiet_NaN());

    Errc code() const noexcept { return code_; }
    // time at which a time-local failure was detected, NaN otherwise
    double at_time() const noexcept { return at_time_; }

private:
    Errc code_;
    double at_time_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

inline void require(bool cond, const char* what) {
    if (!cond) fail(Errc::invalid_argument, what);
}

}  // namespace oudiff
