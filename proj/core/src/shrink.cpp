#include "shrinknas/shrink.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "shrinknas/errors.hpp"

namespace shrinknas {

std::string_view to_string(EvaluatorKind kind) {
  return kind == EvaluatorKind::Surrogate ? "surrogate" : "trainer";
}

std::string_view to_string(ResourceKind kind) {
  return kind == ResourceKind::Macs ? "macs" : "params";
}

void SearchConfig::validate() const {
  if (n < 2) throw InvalidArgument("search.n must be >= 2, got " + std::to_string(n));
  if (k < 1) throw InvalidArgument("search.k must be >= 1, got " + std::to_string(k));
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument("search.lambda must be a finite value >= 0");
  }
  if (epochs_per_candidate < 0) throw InvalidArgument("evaluator.epochs must be >= 0");
}

SearchConfig SearchConfig::defaults_for(CellKind kind) {
  SearchConfig config;
  config.kind = kind;
  if (kind == CellKind::Rnn) {
    config.n = 6;
    config.k = 5;
    config.resource_kind = ResourceKind::Params;
  }
  return config;
}

double search_metric(double perf, double res, double lambda) {
  return perf - lambda * std::log(std::max(res, 1.0));
}

Score score(const CellTopology& g, const SearchConfig& config, const Evaluator& evaluator,
            std::uint64_t seed) {
  Score out;
  out.eval = evaluator.evaluate(g, seed);
  out.perf = out.eval.perf;
  out.res = static_cast<double>(resource_value(out.eval.res, config.resource_kind));
  out.s = search_metric(out.perf, out.res, config.lambda);
  return out;
}

std::vector<CellTopology> shrink_space(const CellTopology& g) {
  std::vector<CellTopology> space;
  space.reserve(g.edge_count());
  for (const Edge& e : g.edges()) space.push_back(g.without_edge(e));
  return space;
}

std::vector<std::size_t> select_candidate_indices(std::size_t space_size, int k, Rng& rng) {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  const std::size_t take = std::min(space_size, static_cast<std::size_t>(k));
  std::vector<std::size_t> pool(space_size);
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates: the first `take` slots are a uniform sample.
  for (std::size_t i = 0; i < take; ++i) std::swap(pool[i], pool[i + rng.below(space_size - i)]);
  pool.resize(take);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<CellTopology> select_candidates(const std::vector<CellTopology>& space, int k, Rng& rng) {
  std::vector<CellTopology> out;
  for (std::size_t i : select_candidate_indices(space.size(), k, rng)) out.push_back(space[i]);
  return out;
}

std::uint64_t candidate_seed(std::uint64_t seed, int t, Edge removed) {
  std::uint64_t h = mix_seed(seed, static_cast<std::uint64_t>(t));
  h = mix_seed(h, static_cast<std::uint64_t>(removed.from));
  return mix_seed(h, static_cast<std::uint64_t>(removed.to));
}

std::size_t ShrinkTrajectory::evaluations() const {
  std::size_t total = 0;
  for (const auto& step : steps) total += step.candidates.size();
  return total;
}

namespace {

void write_row(std::ostringstream& out, int t, const CandidateRecord& c, bool winner) {
  out << t << ',';
  if (c.removed.from < 0) {
    out << "none";
  } else {
    out << c.removed.from << '-' << c.removed.to;
  }
  out << ',' << c.score.s << ',' << c.score.perf << ',' << c.score.eval.raw_metric << ','
      << c.score.eval.res.macs << ',' << c.score.eval.res.params << ',' << c.live_nodes << ','
      << c.topology.edge_count() << ',' << (winner ? 1 : 0) << '\n';
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
/// failure by index is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn fn) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : pool) thread.join();
  for (auto& error : errors)
    if (error) std::rethrow_exception(error);
}

CandidateRecord evaluate_candidate(CellTopology g, Edge removed, int t, const SearchConfig& config,
                                   const Evaluator& evaluator) {
  CandidateRecord record;
  record.removed = removed;
  record.live_nodes = static_cast<int>(map_to_block(g).live_nodes.size());
  record.score = score(g, config, evaluator, candidate_seed(config.seed, t, removed));
  record.topology = std::move(g);
  return record;
}

}  // namespace

std::string ShrinkTrajectory::to_csv() const {
  std::ostringstream out;
  out << std::setprecision(12);
  out << "t,removed_edge,S,perf,raw_metric,macs,params,live_nodes,edges_remaining,winner\n";
  write_row(out, -1, initial, false);
  for (const auto& step : steps) {
    for (std::size_t i = 0; i < step.candidates.size(); ++i) {
      write_row(out, step.t, step.candidates[i], i == step.winner);
    }
  }
  return out.str();
}

ShrinkTrajectory run_shrink(const SearchConfig& config, const Evaluator& evaluator, int workers) {
  config.validate();
  ShrinkTrajectory trajectory;
  trajectory.config = config;

  CellTopology current = complete_dag(config.n, config.kind, config.seed);
  trajectory.initial = evaluate_candidate(current, Edge{-1, -1}, -1, config, evaluator);
  trajectory.best = current;
  trajectory.best_score = trajectory.initial.score.s;
  trajectory.best_step = -1;

  Rng selector(mix_seed(config.seed, 0x5e1ec7));
  for (int t = 0; current.edge_count() > 0; ++t) {
    const std::vector<std::size_t> picked =
        select_candidate_indices(current.edge_count(), config.k, selector);

    ShrinkStep step;
    step.t = t;
    step.candidates.resize(picked.size());
    parallel_for(picked.size(), workers, [&](std::size_t i) {
      const Edge removed = current.edges()[picked[i]];
      step.candidates[i] = evaluate_candidate(current.without_edge(removed), removed, t, config, evaluator);
    });

    // Candidates are in ascending edge order, so a strict comparison keeps
    // the smallest removed edge on ties.
    for (std::size_t i = 1; i < step.candidates.size(); ++i) {
      if (step.candidates[i].score.s > step.candidates[step.winner].score.s) step.winner = i;
    }
    current = step.best().topology;
    if (step.best().score.s > trajectory.best_score) {
      trajectory.best_score = step.best().score.s;
      trajectory.best = current;
      trajectory.best_step = t;
    }
    trajectory.steps.push_back(std::move(step));
  }
  return trajectory;
}

std::vector<KSweepRow> k_sweep(const SearchConfig& base, std::span<const int> k_values,
                               std::span<const int> n_values, const Evaluator& evaluator,
                               int workers) {
  if (k_values.empty() || n_values.empty()) throw InvalidArgument("k_sweep needs non-empty k and n lists");
  std::vector<KSweepRow> rows;
  for (int n : n_values) {
    for (int k : k_values) {
      SearchConfig config = base;
      config.n = n;
      config.k = k;
      const ShrinkTrajectory trajectory = run_shrink(config, evaluator, workers);
      KSweepRow row;
      row.n = n;
      row.k = k;
      row.evaluations = trajectory.evaluations();
      row.best_score = trajectory.best_score;
      row.best_perf = trajectory.best_step < 0
                          ? trajectory.initial.score.perf
                          : trajectory.steps[static_cast<std::size_t>(trajectory.best_step)].best().score.perf;
      row.best_edges = trajectory.best.edge_count();
      rows.push_back(row);
    }
  }
  return rows;
}

std::string k_sweep_csv(std::span<const KSweepRow> rows) {
  std::ostringstream out;
  out << std::setprecision(12);
  out << "n,k,evaluations,best_perf,best_S,best_edges\n";
  for (const auto& r : rows) {
    out << r.n << ',' << r.k << ',' << r.evaluations << ',' << r.best_perf << ',' << r.best_score
        << ',' << r.best_edges << '\n';
  }
  return out.str();
}

}  // namespace shrinknas
