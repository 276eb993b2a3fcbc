#pragma once

#include <stdexcept>
#include <string>

namespace qiup {

// Invalid or inconsistent user-supplied configuration. CLI exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// The requested operation does not support the given pump profile.
class unsupported_profile_error : public std::invalid_argument {
public:
    explicit unsupported_profile_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// Quadrature refinement hit its cap before reaching the requested tolerance.
// CLI exit code 3.
class quadrature_error : public std::runtime_error {
public:
    quadrature_error(const std::string& msg, double achieved)
        : std::runtime_error(msg + " (achieved tolerance " + std::to_string(achieved) + ")"),
          achieved_tol(achieved) {}
    double achieved_tol;
};

// A truncated integration window failed its boundary-decay check. CLI exit code 3.
class window_error : public std::runtime_error {
public:
    explicit window_error(const std::string& msg) : std::runtime_error(msg) {}
};

// The resolution search could not establish a sign-changing bracket. CLI exit code 4.
class bracket_error : public std::runtime_error {
public:
    explicit bracket_error(const std::string& msg) : std::runtime_error(msg) {}
};

}
