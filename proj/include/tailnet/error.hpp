#pragma once

#include <stdexcept>
#include <string>

namespace tailnet {

/// Invalid market configuration or malformed input.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The requested evaluation method cannot be carried out for this input
/// (exact path on a non-insurance rule, enumeration over the ceiling, ...).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A quantity is mathematically undefined for the given arguments.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace tailnet
