#pragma once

#include <span>
#include <vector>

#include "mixlab/ising.hpp"
#include "mixlab/rng.hpp"

namespace mixlab {

/// A vertex subset F together with the connected components of the graph
/// induced on its complement.
///
/// Given the spins on F, the components of F^c are conditionally independent,
/// so both the F^c-marginalized conditional law of one F-spin and a joint
/// resample of F^c factor over components. Each component is enumerated on
/// its own, which keeps exact block updates feasible whenever every component
/// (rather than all of F^c) is small.
class SubsetLayout {
 public:
  SubsetLayout(const IsingModel& model, std::vector<int> subset);

  const IsingModel& model() const { return model_; }
  const std::vector<int>& members() const { return members_; }
  const std::vector<int>& complement() const { return complement_; }
  bool contains(int v) const { return in_subset_[static_cast<std::size_t>(v)]; }
  /// Position of v in members(), or -1.
  int position(int v) const { return position_[static_cast<std::size_t>(v)]; }
  int size() const { return static_cast<int>(members_.size()); }

  /// Largest component of the complement (0 when F = V).
  int largest_component() const { return largest_; }

  /// log P(s(v)=+1 | s on F\{v}) - log P(s(v)=-1 | ...), with F^c summed
  /// out. Only the F entries of sigma are read. v must belong to F.
  double conditional_log_odds(const SpinConfig& sigma, int v) const;
  double conditional_plus_probability(const SpinConfig& sigma, int v) const;

  /// Redraws every F^c spin from its conditional law given the F spins,
  /// one uniform per component.
  void resample_complement(SpinConfig& sigma, RngStream& rng) const;

 private:
  struct Component {
    std::vector<int> vertices;
    struct Internal {
      int a, b;
      double coupling;
    };
    std::vector<Internal> internal;
    struct Boundary {
      int local;  // index into vertices
      int outside;  // vertex of F
      double coupling;
    };
    std::vector<Boundary> boundary;
  };

  // log sum_tau exp(energy) for the component with the given F spins;
  // override_vertex (if >= 0) is read as override_spin.
  double component_log_partition(const Component& c, const SpinConfig& sigma, int override_vertex,
                                 int override_spin) const;
  void component_fields(const Component& c, const SpinConfig& sigma, int override_vertex, int override_spin,
                        std::vector<double>& fields) const;

  IsingModel model_;
  std::vector<int> members_;
  std::vector<int> complement_;
  std::vector<bool> in_subset_;
  std::vector<int> position_;
  std::vector<Component> components_;
  std::vector<std::vector<int>> adjacent_components_;  // per vertex of F
  int largest_ = 0;
};

}  // namespace mixlab
