#pragma once

#include <stdexcept>
#include <string>

namespace wentzell {

/// Broad failure classes. The CLI maps them onto its exit-status contract.
enum class ErrorKind { invalid_spec, shape, adaptedness, numerical, non_contraction, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InvalidSpecError : Error {
    explicit InvalidSpecError(const std::string& what) : Error(ErrorKind::invalid_spec, what) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error(ErrorKind::shape, what) {}
};

struct AdaptednessError : Error {
    explicit AdaptednessError(const std::string& what) : Error(ErrorKind::adaptedness, what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

struct NonContractionError : Error {
    explicit NonContractionError(const std::string& what) : Error(ErrorKind::non_contraction, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw InvalidSpecError(msg);
}

inline void require_shape(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

}  // namespace detail
}  // namespace wentzell
