#ifndef CUSPLAB_ERRORS_HPP
#define CUSPLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cusplab {

/// Input violates a documented precondition or type invariant.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure could not reach its contract (tolerance, step size, bracket).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool ok, const std::string& what)
{
    if (!ok) throw ValidationError(what);
}

} // namespace detail
} // namespace cusplab

#endif // CUSPLAB_ERRORS_HPP
