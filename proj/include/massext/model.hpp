#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "massext/rng.hpp"

namespace massext {

/// Branching degree and per-particle mutation rate of the process.
struct ModelParams {
  int d = 2;
  double lambda = 0.0;

  // lambda == 0 is accepted as a degenerate (birthless) configuration.
  void validate() const {
    if (d < 1) throw std::invalid_argument("d must be >= 1, got " + std::to_string(d));
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw std::invalid_argument("lambda must be finite and >= 0, got " + std::to_string(lambda));
  }

  bool operator==(const ModelParams&) const = default;
};

/// Address of a vertex of the rooted d-ary tree as the tuple of child
/// indices (each in 1..d) leading to it from the root.
class VertexId {
 public:
  VertexId() = default;
  explicit VertexId(std::vector<std::uint32_t> path) : path_(std::move(path)) {}

  static VertexId root() { return VertexId{}; }

  std::size_t level() const { return path_.size(); }
  bool is_root() const { return path_.empty(); }
  const std::vector<std::uint32_t>& path() const { return path_; }

  VertexId parent() const {
    if (is_root()) throw std::invalid_argument("the root has no parent");
    return VertexId{std::vector<std::uint32_t>(path_.begin(), path_.end() - 1)};
  }

  // Dot-joined child indices; the root renders as the empty string.
  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < path_.size(); ++i) {
      if (i > 0) out += '.';
      out += std::to_string(path_[i]);
    }
    return out;
  }

  auto operator<=>(const VertexId&) const = default;

 private:
  std::vector<std::uint32_t> path_;
};

inline VertexId child_address(const VertexId& v, std::uint32_t j, int d) {
  if (j < 1 || j > static_cast<std::uint32_t>(std::max(d, 0)))
    throw std::invalid_argument("child index " + std::to_string(j) + " outside 1.." +
                                std::to_string(d));
  std::vector<std::uint32_t> path = v.path();
  path.push_back(j);
  return VertexId{std::move(path)};
}

using ParticleId = std::size_t;
inline constexpr ParticleId kNoParticle = std::numeric_limits<ParticleId>::max();

/// One particle ever born in a run. Dead particles stay in the genealogy so
/// vertex addresses of their descendants remain reconstructible.
struct Particle {
  ParticleId parent = kNoParticle;
  std::uint32_t slot = 0;  // child index at the parent, 0 for the root
  std::uint32_t ptype = 0;
  std::uint32_t children_born = 0;
  bool alive = true;
  std::size_t fertile_pos = kNoParticle;  // index into the fertile list, if fertile

  bool operator==(const Particle&) const = default;
};

/// Live configuration of the process plus the genealogy of the run.
///
/// Live particles are grouped in cohorts by type; cohort i of `cohorts()`
/// holds type `lowest_live_type() + i`. Only the lowest cohort has a kill
/// clock, whose absolute ring time is `kill_deadline()`. Fertile live
/// particles are indexed in a flat list supporting O(1) uniform selection
/// and O(1) swap-with-last removal.
class ProcessState {
 public:
  ProcessState() = default;

  ProcessState(int d, double kill_deadline) : d_(d), kill_deadline_(kill_deadline) {
    particles_.push_back(Particle{});
    append_slots();
    cohorts_.push_back({0});
    total_born_by_type_.push_back(1);
    live_count_ = 1;
    if (d_ > 0) add_fertile(0);
  }

  int d() const { return d_; }
  double time() const { return time_; }
  std::uint32_t lowest_live_type() const { return lowest_live_type_; }
  double kill_deadline() const { return kill_deadline_; }
  const std::deque<std::vector<ParticleId>>& cohorts() const { return cohorts_; }
  const std::vector<std::uint64_t>& total_born_by_type() const { return total_born_by_type_; }
  const std::vector<Particle>& particles() const { return particles_; }
  const std::vector<ParticleId>& fertile() const { return fertile_; }
  std::size_t live_count() const { return live_count_; }
  std::size_t fertile_count() const { return fertile_.size(); }
  bool empty() const { return live_count_ == 0; }

  const Particle& particle(ParticleId id) const { return particles_.at(id); }

  // Child indices not yet used by particle `id`.
  std::span<const std::uint32_t> unfilled_children(ParticleId id) const {
    const Particle& p = particles_.at(id);
    const std::size_t base = id * static_cast<std::size_t>(d_);
    return {slots_.data() + base, static_cast<std::size_t>(d_) - p.children_born};
  }

  VertexId vertex(ParticleId id) const {
    std::vector<std::uint32_t> path;
    for (ParticleId cur = id; particles_.at(cur).parent != kNoParticle;
         cur = particles_[cur].parent)
      path.push_back(particles_[cur].slot);
    return VertexId{std::vector<std::uint32_t>(path.rbegin(), path.rend())};
  }

  std::uint32_t highest_live_type() const {
    return lowest_live_type_ + static_cast<std::uint32_t>(cohorts_.size()) - 1;
  }

  // --- mutation, driven by the engine -------------------------------------

  void advance_to(double t) { time_ = t; }
  void set_kill_deadline(double t) { kill_deadline_ = t; }

  /// Fills the `unfilled_index`-th unfilled child slot of `parent_id`.
  ParticleId give_birth(ParticleId parent_id, std::size_t unfilled_index) {
    Particle& parent = particles_.at(parent_id);
    if (!parent.alive) throw std::logic_error("birth from a dead particle");
    const std::size_t remaining = static_cast<std::size_t>(d_) - parent.children_born;
    if (unfilled_index >= remaining) throw std::logic_error("birth into an occupied slot");

    const std::size_t base = parent_id * static_cast<std::size_t>(d_);
    const std::uint32_t slot = slots_[base + unfilled_index];
    std::swap(slots_[base + unfilled_index], slots_[base + remaining - 1]);
    ++parent.children_born;
    const std::uint32_t child_type = parent.ptype + 1;
    if (parent.children_born == static_cast<std::uint32_t>(d_)) remove_fertile(parent_id);

    const ParticleId id = particles_.size();
    particles_.push_back(Particle{parent_id, slot, child_type, 0, true, kNoParticle});
    append_slots();
    add_fertile(id);

    const std::size_t offset = child_type - lowest_live_type_;
    if (offset == cohorts_.size()) cohorts_.emplace_back();
    cohorts_[offset].push_back(id);
    if (child_type >= total_born_by_type_.size()) total_born_by_type_.resize(child_type + 1, 0);
    ++total_born_by_type_[child_type];
    ++live_count_;
    return id;
  }

  /// Removes the whole lowest cohort; returns its type and size.
  std::pair<std::uint32_t, std::size_t> kill_lowest_cohort() {
    if (cohorts_.empty()) throw std::logic_error("kill on an empty state");
    const std::uint32_t type = lowest_live_type_;
    const std::vector<ParticleId> cohort = std::move(cohorts_.front());
    cohorts_.pop_front();
    for (ParticleId id : cohort) {
      particles_[id].alive = false;
      if (particles_[id].fertile_pos != kNoParticle) remove_fertile(id);
    }
    live_count_ -= cohort.size();
    ++lowest_live_type_;
    kill_deadline_ = std::numeric_limits<double>::infinity();
    return {type, cohort.size()};
  }

  // Empty string when all structural invariants hold, else a description of
  // the first violation. Walks the whole genealogy; intended for tests.
  std::string check_invariants() const {
    std::size_t live = 0;
    for (std::size_t c = 0; c < cohorts_.size(); ++c) {
      if (cohorts_[c].empty()) return "gap in live types at offset " + std::to_string(c);
      for (ParticleId id : cohorts_[c]) {
        const Particle& p = particles_[id];
        if (!p.alive) return "dead particle in a cohort";
        if (p.ptype != lowest_live_type_ + c) return "particle filed under the wrong cohort";
        if (vertex(id).level() != p.ptype) return "type differs from vertex level";
        const bool fertile = p.children_born < static_cast<std::uint32_t>(d_);
        if (fertile != (p.fertile_pos != kNoParticle)) return "fertile index out of sync";
        if (p.children_born + unfilled_children(id).size() != static_cast<std::size_t>(d_))
          return "slot bookkeeping broken";
        ++live;
      }
    }
    if (live != live_count_) return "live count mismatch";
    for (std::size_t i = 0; i < fertile_.size(); ++i)
      if (particles_[fertile_[i]].fertile_pos != i) return "fertile position mismatch";
    if (std::accumulate(total_born_by_type_.begin(), total_born_by_type_.end(), std::uint64_t{0}) !=
        particles_.size())
      return "birth counters disagree with genealogy";
    return {};
  }

  bool operator==(const ProcessState&) const = default;

 private:
  void append_slots() {
    for (int j = 1; j <= d_; ++j) slots_.push_back(static_cast<std::uint32_t>(j));
  }
  void add_fertile(ParticleId id) {
    particles_[id].fertile_pos = fertile_.size();
    fertile_.push_back(id);
  }
  void remove_fertile(ParticleId id) {
    const std::size_t pos = particles_[id].fertile_pos;
    const ParticleId last = fertile_.back();
    fertile_[pos] = last;
    particles_[last].fertile_pos = pos;
    fertile_.pop_back();
    particles_[id].fertile_pos = kNoParticle;
  }

  int d_ = 0;
  double time_ = 0.0;
  std::uint32_t lowest_live_type_ = 0;
  double kill_deadline_ = std::numeric_limits<double>::infinity();
  std::deque<std::vector<ParticleId>> cohorts_;
  std::vector<std::uint64_t> total_born_by_type_;
  std::vector<Particle> particles_;
  std::vector<std::uint32_t> slots_;  // d entries per particle; unfilled ones first
  std::vector<ParticleId> fertile_;
  std::size_t live_count_ = 0;
};

// The root's kill clock runs from t = 0.
inline ProcessState initial_state(const ModelParams& params, Rng& rng) {
  params.validate();
  return ProcessState{params.d, sample_exponential(rng, 1.0)};
}

inline ProcessState initial_state(const ModelParams& params, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return initial_state(params, rng);
}

}  // namespace massext
