#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvsde {

/// Base class for numerical failures raised while running a simulation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A particle state became NaN or infinite. This points at a model that
/// violates the growth assumptions (or at taming being disabled), not at a
/// library bug, so the run is aborted instead of clamped.
class NonFinite : public NumericalError {
 public:
  NonFinite(std::size_t particle, std::size_t step)
      : NumericalError("non-finite state for particle " + std::to_string(particle) + " at step " +
                       std::to_string(step)),
        particle_(particle),
        step_(step) {}

  [[nodiscard]] std::size_t particle() const noexcept { return particle_; }
  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t particle_;
  std::size_t step_;
};

}  // namespace mvsde
