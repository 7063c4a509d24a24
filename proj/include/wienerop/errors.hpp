#pragma once

#include <stdexcept>
#include <string>

namespace wienerop {

/// A documented precondition of an operation does not hold for its input
/// (asymmetric kernel passed where an S2 member is required, etc.).
class PreconditionViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// I + B is numerically singular, so no inverse kernel exists.
class SingularOperator : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lambda(B_eta) is not below one: I - B_eta has no positive square root
/// in the regime where e^{q_eta} is integrable.
class NotContractive : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace wienerop
