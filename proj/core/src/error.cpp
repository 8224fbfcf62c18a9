#include "oudiff/error.hpp"

namespace oudiff {

std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::invalid_argument: return "invalid-argument";
        case Errc::unsupported_shape: return "unsupported-shape";
        case Errc::singular_matrix: return "singular-matrix";
        case Errc::not_positive_definite: return "not-positive-definite";
        case Errc::degenerate_drift: return "degenerate-drift";
        case Errc::unstable_at_time: return "unstable-at-time";
        case Errc::degenerate_rate: return "degenerate-rate";
        case Errc::no_collapse: return "no-collapse";
        case Errc::cgf_domain: return "cgf-domain-error";
        case Errc::kernel_degenerate: return "kernel-degenerate";
        case Errc::undefined_label: return "undefined-label";
        case Errc::io_failure: return "io-failure";
    }
    return "unknown";
}

Error::Error(Errc code, const std::string& what, double at_time)
    : std::runtime_error(std::string(to_string(code)) + ": " + what),
      code_(code),
      at_time_(at_time) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace oudiff
