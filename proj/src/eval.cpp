/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing,
 * software distributed under the License is distributed on an
 * "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, either express or implied.  See the License for the
 * specific language governing permissions and limitations
 * under the License.
 */

#include "kll/eval.hpp"

#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "kll/item_codec.hpp"
#include "kll/kll_sketch.hpp"
#include "kll/rng.hpp"
#include "kll/weighted.hpp"

namespace kll {

StreamKind parse_stream_kind(std::string_view s) {
  if (s == "sorted") return StreamKind::Sorted;
  if (s == "shuffled") return StreamKind::Shuffled;
  if (s == "trending") return StreamKind::Trending;
  if (s == "brownian") return StreamKind::Brownian;
  if (s == "file") return StreamKind::File;
  throw std::invalid_argument("unknown stream kind: " + std::string(s));
}

std::string_view to_string(StreamKind k) {
  switch (k) {
    case StreamKind::Sorted: return "sorted";
    case StreamKind::Shuffled: return "shuffled";
    case StreamKind::Trending: return "trending";
    case StreamKind::Brownian: return "brownian";
    case StreamKind::File: return "file";
  }
  return "?";
}

Backend parse_backend(std::string_view s) {
  if (s == "list") return Backend::List;
  if (s == "packed") return Backend::Packed;
  throw std::invalid_argument("unknown backend: " + std::string(s));
}

std::string VariantSpec::label() const {
  std::string s = flags.digits();
  if (mode != WeightedMode::None) {
    s += '/';
    s += to_string(mode);
  }
  return s;
}

std::vector<double> gen_stream(const StreamSpec& spec) {
  if (spec.kind != StreamKind::File && spec.n < 1) throw std::invalid_argument("stream length must be at least 1");
  std::vector<double> out;
  std::mt19937_64 gen(spec.seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  switch (spec.kind) {
    case StreamKind::Sorted:
    case StreamKind::Shuffled:
      out.resize(spec.n);
      std::iota(out.begin(), out.end(), 1.0);
      if (spec.kind == StreamKind::Shuffled) std::shuffle(out.begin(), out.end(), gen);
      break;
    case StreamKind::Trending:
      out.reserve(spec.n);
      for (std::uint64_t t = 1; t <= spec.n; ++t) {
        out.push_back(spec.trend * static_cast<double>(t) / static_cast<double>(spec.n) + spec.noise * u(gen));
      }
      break;
    case StreamKind::Brownian: {
      out.reserve(spec.n);
      double s = 0.0;
      for (std::uint64_t t = 0; t < spec.n; ++t) out.push_back(s += spec.step * u(gen));
      break;
    }
    case StreamKind::File: {
      std::ifstream in(spec.path);
      if (!in) throw std::runtime_error("cannot read stream file: " + spec.path);
      std::string line;
      std::uint64_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto tab = line.find('\t');
        const std::string_view item = tab == std::string::npos ? std::string_view(line) : std::string_view(line).substr(tab + 1);
        try {
          out.push_back(ItemTraits<double>::parse(item));
        } catch (const std::exception& e) {
          throw std::runtime_error("line " + std::to_string(lineno) + ": " + e.what());
        }
      }
      if (out.empty()) throw std::runtime_error("stream file is empty: " + spec.path);
      break;
    }
  }
  return out;
}

std::vector<std::uint64_t> gen_weights(std::uint64_t n, std::uint64_t max_weight, std::uint64_t seed) {
  if (max_weight < 1) throw std::invalid_argument("max weight must be at least 1");
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::uint64_t> d(1, max_weight);
  std::vector<std::uint64_t> out(n);
  for (auto& w : out) w = d(gen);
  return out;
}

namespace {

template <class Sketch>
TrialResult measure(const Sketch& s, const ExactRanks<double>& oracle, std::size_t q_count) {
  return {max_quantile_error(s, oracle, q_count), s.compactions(), s.discarded_weight()};
}

template <class Storage>
TrialResult run_kll(const VariantSpec& v, std::uint32_t budget, double c, std::uint64_t seed,
                    const std::vector<double>& items, const std::vector<std::uint64_t>& weights,
                    const ExactRanks<double>& oracle, std::size_t q_count) {
  KllSketch<double, Storage> s(budget, c, v.flags, seed, v.mode);
  if (v.mode == WeightedMode::Base2) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      base2_update(s, WeightedItem<double>{items[i], weights.empty() ? 1 : weights[i]});
    }
  } else {
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::uint64_t w = weights.empty() ? 1 : weights[i];
      for (std::uint64_t j = 0; j < w; ++j) s.update(items[i]);
    }
  }
  return measure(s, oracle, q_count);
}

}  // namespace

TrialResult run_trial(const VariantSpec& v, std::uint32_t budget, double c, Backend backend, std::uint64_t seed,
                      const std::vector<double>& items, const std::vector<std::uint64_t>& weights,
                      const ExactRanks<double>& oracle, std::size_t q_count) {
  if (v.mode == WeightedMode::WeightAware) {
    WeightAwareSketch<double> s(budget, c, v.flags, seed);
    for (std::size_t i = 0; i < items.size(); ++i) s.update(items[i], weights.empty() ? 1 : weights[i]);
    return measure(s, oracle, q_count);
  }
  if (backend == Backend::Packed) {
    return run_kll<PackedStore<double>>(v, budget, c, seed, items, weights, oracle, q_count);
  }
  return run_kll<ListStorage<double>>(v, budget, c, seed, items, weights, oracle, q_count);
}

void write_csv_header(std::ostream& out) {
  out << "variant,budget,stream_kind,n,trials,mean_max_err,p95_max_err,compactions,discarded_weight\n";
}

void write_csv_row(std::ostream& out, const EvalRecord& r) {
  out << r.variant << ',' << r.budget << ',' << to_string(r.kind) << ',' << r.n << ',' << r.trials << ','
      << r.mean_max_err << ',' << r.p95_max_err << ',' << r.compactions << ',' << r.discarded_weight << '\n';
}

std::vector<EvalRecord> run_experiment(const ExperimentMatrix& m, std::ostream* csv) {
  if (m.trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (m.variants.empty() || m.budgets.empty() || m.streams.empty()) throw std::invalid_argument("empty experiment matrix");
  std::vector<EvalRecord> records;
  const std::size_t cells = m.variants.size() * m.budgets.size();
  for (std::size_t si = 0; si < m.streams.size(); ++si) {
    // results[cell * trials + t]
    std::vector<TrialResult> results(cells * m.trials);
    std::uint64_t stream_n = 0;
    auto run_trials = [&](std::uint32_t first, std::uint32_t stride) {
      for (std::uint32_t t = first; t < m.trials; t += stride) {
        StreamSpec spec = m.streams[si];
        spec.seed = derive_seed({m.master_seed, si, t, 1});
        const std::vector<double> items = gen_stream(spec);
        const std::vector<std::uint64_t> weights =
            m.max_weight > 1 ? gen_weights(items.size(), m.max_weight, derive_seed({m.master_seed, si, t, 2}))
                             : std::vector<std::uint64_t>{};
        const ExactRanks<double> oracle(items, weights);
        if (t == 0) stream_n = items.size();
        const std::uint64_t sketch_seed = derive_seed({m.master_seed, si, t, 3});
        for (std::size_t vi = 0; vi < m.variants.size(); ++vi) {
          for (std::size_t bi = 0; bi < m.budgets.size(); ++bi) {
            const std::size_t cell = vi * m.budgets.size() + bi;
            results[cell * m.trials + t] = run_trial(m.variants[vi], m.budgets[bi], m.c, m.backend, sketch_seed, items,
                                                     weights, oracle, m.q_count);
          }
        }
      }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(m.threads, m.trials));
    if (threads == 1) {
      run_trials(0, 1);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(threads);
      for (unsigned i = 0; i < threads; ++i) {
        pool.emplace_back([&, i] {
          try {
            run_trials(i, threads);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    for (std::size_t vi = 0; vi < m.variants.size(); ++vi) {
      for (std::size_t bi = 0; bi < m.budgets.size(); ++bi) {
        const std::size_t cell = vi * m.budgets.size() + bi;
        std::vector<double> errs;
        double comp = 0, disc = 0;
        for (std::uint32_t t = 0; t < m.trials; ++t) {
          const auto& r = results[cell * m.trials + t];
          errs.push_back(r.max_err);
          comp += static_cast<double>(r.compactions);
          disc += static_cast<double>(r.discarded);
        }
        std::sort(errs.begin(), errs.end());
        EvalRecord rec;
        rec.variant = m.variants[vi].label();
        rec.budget = m.budgets[bi];
        rec.kind = m.streams[si].kind;
        rec.n = stream_n;
        rec.trials = m.trials;
        rec.mean_max_err = std::accumulate(errs.begin(), errs.end(), 0.0) / m.trials;
        // nearest-rank percentile
        const auto idx = static_cast<std::size_t>(std::ceil(0.95 * m.trials)) - 1;
        rec.p95_max_err = errs[std::min(idx, errs.size() - 1)];
        rec.compactions = comp / m.trials;
        rec.discarded_weight = disc / m.trials;
        records.push_back(rec);
        if (csv) {
          write_csv_row(*csv, rec);
          csv->flush();
          if (!*csv) throw std::runtime_error("failed to write CSV output");
        }
      }
    }
  }
  return records;
}

}  // namespace kll
