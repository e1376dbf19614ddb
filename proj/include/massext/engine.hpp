#pragma once

#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "massext/model.hpp"
#include "massext/parallel.hpp"
#include "massext/rng.hpp"
#include "massext/stats.hpp"

namespace massext {

/// Censoring bounds for a run. A bound of std::nullopt is disabled.
struct StopRule {
  std::optional<double> max_time;
  std::optional<std::uint64_t> max_live_particles = 100'000;
  std::optional<std::uint64_t> max_type_born = 10'000;
  std::optional<std::uint64_t> max_events = 10'000'000;

  void validate() const {
    if (!max_time && !max_live_particles && !max_type_born && !max_events)
      throw std::invalid_argument("stop rule needs at least one finite bound");
    if (max_time && !(*max_time >= 0.0)) throw std::invalid_argument("max_time must be >= 0");
  }

  bool operator==(const StopRule&) const = default;
};

struct BirthEvent {
  ParticleId parent;
  ParticleId child;
};

struct KillEvent {
  std::uint32_t type;
  std::size_t cohort_size;
};

struct Event {
  double time = 0.0;
  std::variant<BirthEvent, KillEvent> what;

  bool is_birth() const { return std::holds_alternative<BirthEvent>(what); }
  bool is_kill() const { return std::holds_alternative<KillEvent>(what); }
};

/// Advances the process by one event, unless the next event would fall after
/// `horizon`, in which case time moves to `horizon` and nothing happens.
///
/// A birth competes with the armed kill clock: the candidate birth time is
/// exponential with rate lambda times the number of fertile particles, and
/// it wins when strictly earlier than the deadline. Births pick a fertile
/// particle uniformly and then one of its unfilled child slots uniformly.
/// After a kill the next cohort, if any, gets a fresh Exp(1) clock from the
/// kill time.
inline std::optional<Event> step(ProcessState& state, double lambda, Rng& rng,
                                 double horizon = std::numeric_limits<double>::infinity()) {
  if (state.empty()) throw std::logic_error("step called on an empty state");

  const std::size_t fertile = state.fertile_count();
  double birth_time = std::numeric_limits<double>::infinity();
  if (fertile > 0 && lambda > 0.0)
    birth_time = state.time() + sample_exponential(rng, lambda * static_cast<double>(fertile));

  if (birth_time < state.kill_deadline()) {
    if (birth_time > horizon) {
      state.advance_to(horizon);
      return std::nullopt;
    }
    state.advance_to(birth_time);
    const ParticleId parent =
        state.fertile()[std::uniform_int_distribution<std::size_t>{0, fertile - 1}(rng)];
    const std::size_t open = state.unfilled_children(parent).size();
    const ParticleId child =
        state.give_birth(parent, std::uniform_int_distribution<std::size_t>{0, open - 1}(rng));
    return Event{birth_time, BirthEvent{parent, child}};
  }

  const double kill_time = state.kill_deadline();
  if (kill_time > horizon) {
    state.advance_to(horizon);
    return std::nullopt;
  }
  state.advance_to(kill_time);
  const auto [type, size] = state.kill_lowest_cohort();
  if (!state.empty()) state.set_kill_deadline(kill_time + sample_exponential(rng, 1.0));
  return Event{kill_time, KillEvent{type, size}};
}

enum class CensorReason { kTime, kPopulation, kMaxType, kEvents };

inline std::string_view to_string(CensorReason r) {
  switch (r) {
    case CensorReason::kTime: return "time";
    case CensorReason::kPopulation: return "population";
    case CensorReason::kMaxType: return "max_type";
    case CensorReason::kEvents: return "events";
  }
  return "unknown";
}

struct Extinct {
  double time;
};

struct Censored {
  CensorReason reason;
  double time;
};

struct RunRecord {
  std::variant<Extinct, Censored> outcome;
  std::vector<std::uint64_t> total_born_by_type;
  std::uint64_t total_born = 0;
  std::uint32_t max_type_reached = 0;
  std::uint64_t event_count = 0;
  std::uint64_t seed = 0;

  bool extinct() const { return std::holds_alternative<Extinct>(outcome); }

  // Population or type explosion stands in for survival; censoring by time
  // or event budget is indeterminate.
  bool survived() const {
    const auto* c = std::get_if<Censored>(&outcome);
    return c && (c->reason == CensorReason::kPopulation || c->reason == CensorReason::kMaxType);
  }
  bool indeterminate() const { return !extinct() && !survived(); }

  double end_time() const {
    return std::visit([](const auto& o) { return o.time; }, outcome);
  }
};

/// Writes one line per event: index,time,kind,type,vertex. Kill lines carry
/// the killed type and an empty vertex field.
inline void write_trace_line(std::ostream& out, std::uint64_t index, const Event& ev,
                             const ProcessState& state) {
  char time_buf[32];
  std::snprintf(time_buf, sizeof time_buf, "%.17g", ev.time);
  if (const auto* b = std::get_if<BirthEvent>(&ev.what)) {
    out << index << ',' << time_buf << ",B," << state.particle(b->child).ptype << ','
        << state.vertex(b->child).to_string() << '\n';
  } else {
    const auto& k = std::get<KillEvent>(ev.what);
    out << index << ',' << time_buf << ",K," << k.type << ",\n";
  }
}

inline RunRecord run(const ModelParams& params, const StopRule& stop, std::uint64_t seed,
                     std::ostream* trace = nullptr) {
  params.validate();
  stop.validate();
  Rng rng = make_rng(seed);
  ProcessState state = initial_state(params, rng);

  const double horizon = stop.max_time.value_or(std::numeric_limits<double>::infinity());
  std::uint64_t events = 0;
  std::uint32_t max_type = 0;
  std::optional<std::variant<Extinct, Censored>> outcome;

  while (!outcome) {
    const auto ev = step(state, params.lambda, rng, horizon);
    if (!ev) {
      outcome = Censored{CensorReason::kTime, state.time()};
      break;
    }
    ++events;
    if (trace) write_trace_line(*trace, events - 1, *ev, state);
    if (const auto* b = std::get_if<BirthEvent>(&ev->what))
      max_type = std::max(max_type, state.particle(b->child).ptype);

    if (state.empty())
      outcome = Extinct{state.time()};
    else if (stop.max_live_particles && state.live_count() >= *stop.max_live_particles)
      outcome = Censored{CensorReason::kPopulation, state.time()};
    else if (stop.max_type_born && max_type >= *stop.max_type_born)
      outcome = Censored{CensorReason::kMaxType, state.time()};
    else if (stop.max_events && events >= *stop.max_events)
      outcome = Censored{CensorReason::kEvents, state.time()};
  }

  RunRecord rec;
  rec.outcome = *outcome;
  rec.total_born_by_type = state.total_born_by_type();
  rec.total_born = state.particles().size();
  rec.max_type_reached = max_type;
  rec.event_count = events;
  rec.seed = seed;
  return rec;
}

inline constexpr std::string_view kSurvivalTag = "tree_survival";

/// Runs replicas 0..n-1 with seeds derive_seed(master, tag, row, r).
inline std::vector<RunRecord> run_replicas(const ModelParams& params, const StopRule& stop,
                                           std::size_t n_replicas, std::uint64_t master_seed,
                                           unsigned threads = 0, std::uint64_t row = 0,
                                           std::string_view tag = kSurvivalTag) {
  params.validate();
  stop.validate();
  std::vector<RunRecord> records(n_replicas);
  parallel_for(n_replicas, threads, [&](std::size_t r) {
    records[r] = run(params, stop, derive_seed(master_seed, tag, row, r));
  });
  return records;
}

struct SurvivalEstimate {
  std::uint64_t n = 0;
  std::uint64_t survived = 0;
  std::uint64_t extinct = 0;
  std::uint64_t indeterminate = 0;
  double p_hat = 0.0;
  Interval wilson_95;
  double censored_fraction = 0.0;  // indeterminate runs (time or event budget)
  double mean_total_born = 0.0;
  double se_total_born = 0.0;
  std::vector<double> mean_born_by_type;
  std::vector<double> se_born_by_type;
  std::map<std::uint32_t, std::uint64_t> max_type_histogram;
};

inline SurvivalEstimate summarize(const std::vector<RunRecord>& records) {
  SurvivalEstimate est;
  est.n = records.size();
  MeanAccumulator born;
  std::size_t depth = 0;
  for (const auto& r : records) depth = std::max(depth, r.total_born_by_type.size());
  std::vector<MeanAccumulator> by_type(depth);

  for (const auto& r : records) {
    if (r.extinct())
      ++est.extinct;
    else if (r.survived())
      ++est.survived;
    else
      ++est.indeterminate;
    born.push(static_cast<double>(r.total_born));
    for (std::size_t k = 0; k < depth; ++k)
      by_type[k].push(k < r.total_born_by_type.size()
                          ? static_cast<double>(r.total_born_by_type[k])
                          : 0.0);
    ++est.max_type_histogram[r.max_type_reached];
  }
  if (est.n > 0) {
    est.p_hat = static_cast<double>(est.survived) / static_cast<double>(est.n);
    est.censored_fraction = static_cast<double>(est.indeterminate) / static_cast<double>(est.n);
  }
  est.wilson_95 = wilson_interval(est.survived, est.n);
  est.mean_total_born = born.mean();
  est.se_total_born = born.std_error();
  for (const auto& acc : by_type) {
    est.mean_born_by_type.push_back(acc.mean());
    est.se_born_by_type.push_back(acc.std_error());
  }
  return est;
}

inline SurvivalEstimate estimate_survival(const ModelParams& params, const StopRule& stop,
                                          std::size_t n_replicas, std::uint64_t master_seed,
                                          unsigned threads = 0, std::uint64_t row = 0) {
  if (n_replicas < 1) throw std::invalid_argument("n_replicas must be >= 1");
  return summarize(run_replicas(params, stop, n_replicas, master_seed, threads, row));
}

}  // namespace massext
