#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftwt {

using Vec = std::vector<double>;

// A caller broke a documented precondition (dimension mismatch, index out of
// range, ...).
struct contract_error : std::logic_error {
    using std::logic_error::logic_error;
};

// An invalid configuration value (degenerate constraint set, malformed config
// file, unknown enum name, ...).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A numeric evaluation produced NaN/Inf where a finite value is required.
struct evaluation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw contract_error(msg);
}

}  // namespace driftwt
