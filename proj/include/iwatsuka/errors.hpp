#pragma once

#include <stdexcept>
#include <string>

namespace iwatsuka {

// Iteration did not converge or a numerical invariant could not be certified.
class numerical_failure : public std::runtime_error {
public:
    explicit numerical_failure(const std::string& what) : std::runtime_error(what) {}
};

// Turning points not contained in the fiber grid after the maximal expansion.
class grid_failure : public numerical_failure {
public:
    explicit grid_failure(const std::string& what) : numerical_failure(what) {}
};

// Flat band: the band function has no inverse.
class degenerate_band : public std::domain_error {
public:
    explicit degenerate_band(const std::string& what) : std::domain_error(what) {}
};

// Spectral parameter sits inside a band where a gap was required.
class spectral_position_error : public std::domain_error {
public:
    explicit spectral_position_error(const std::string& what) : std::domain_error(what) {}
};

// Rejected input parameters (profile, potential, window, remainder budget).
class parameter_error : public std::invalid_argument {
public:
    explicit parameter_error(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace iwatsuka
