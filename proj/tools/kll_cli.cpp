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

// kll_cli: build, query, merge and inspect sketch files; run experiments.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kll/eval.hpp"
#include "kll/item_codec.hpp"
#include "kll/kll_sketch.hpp"
#include "kll/serde.hpp"
#include "kll/weighted.hpp"

namespace {

using kll::Backend;
using kll::VariantFlags;
using kll::WeightedMode;

// Failures in the data rather than in the command line.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::uint32_t budget = 200;
  double c = kll::kDefaultDecay;
  std::string variant = "1111";
  std::string backend = "packed";
  std::string weighted = "none";
  std::string codec = "f64";
  std::uint64_t seed = 0;
  std::string in = "-";
  std::string out;
  std::string sketch;
  std::vector<double> quantiles;
  std::vector<std::string> ranks;
  std::string cdf;
  std::vector<std::string> merge_inputs;
  // eval
  std::vector<std::string> variants = {"0000", "1000", "1100", "1110", "1111"};
  std::vector<std::uint32_t> budgets = {128, 256, 512, 1024, 2048};
  std::vector<std::string> streams = {"shuffled"};
  std::uint64_t n = 1000000;
  std::uint32_t trials = 50;
  std::uint64_t max_weight = 1;
  double noise = 1.0;
  double trend = 1.0;
  double step = 1.0;
  std::string path;
  std::size_t q_count = 1000;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + path);
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::uint64_t parse_weight(std::string_view s) {
  std::uint64_t w = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), w);
  if (ec != std::errc() || p != s.data() + s.size() || w < 1) {
    throw std::invalid_argument("bad weight '" + std::string(s) + "'");
  }
  return w;
}

// Calls fn(item, weight) per non-blank line; "<weight>\t<item>" or "<item>".
template <class T, class Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    try {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) {
        fn(kll::ItemTraits<T>::parse(line), std::uint64_t{1});
      } else {
        const std::string_view sv(line);
        fn(kll::ItemTraits<T>::parse(sv.substr(tab + 1)), parse_weight(sv.substr(0, tab)));
      }
    } catch (const std::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (in.bad()) throw DataError("read error");
}

template <class Sketch>
void report(const Sketch& s) {
  std::cerr << "n=" << s.n_total() << " H=" << s.height() << " H_s=" << s.sampler_height()
            << " items_n=" << s.items_n() << " compactions=" << s.compactions();
  if (s.discarded_weight() > 0) std::cerr << " discarded=" << s.discarded_weight();
  std::cerr << '\n';
}

template <class T, class Storage>
std::vector<std::uint8_t> build_kll(const Options& o, std::istream& in) {
  const WeightedMode mode = kll::parse_weighted_mode(o.weighted);
  kll::KllSketch<T, Storage> s(o.budget, o.c, VariantFlags::parse(o.variant), o.seed, mode);
  for_each_record<T>(in, [&](const T& x, std::uint64_t w) {
    if (mode == WeightedMode::Base2) {
      kll::base2_update(s, kll::WeightedItem<T>{x, w});
    } else {
      for (std::uint64_t j = 0; j < w; ++j) s.update(x);
    }
  });
  report(s);
  return s.serialize();
}

template <class T>
std::vector<std::uint8_t> build_typed(const Options& o, std::istream& in) {
  if (o.weighted == "weight-aware") {
    kll::WeightAwareSketch<T> s(o.budget, o.c, VariantFlags::parse(o.variant), o.seed);
    for_each_record<T>(in, [&](const T& x, std::uint64_t w) { s.update(x, w); });
    report(s);
    return s.serialize();
  }
  if (kll::parse_backend(o.backend) == Backend::Packed) return build_kll<T, kll::PackedStore<T>>(o, in);
  return build_kll<T, kll::ListStorage<T>>(o, in);
}

int cmd_build(const Options& o) {
  std::vector<std::uint8_t> bytes;
  auto run = [&](std::istream& in) {
    bytes = o.codec == "string" ? build_typed<std::string>(o, in) : build_typed<double>(o, in);
  };
  if (o.in == "-") {
    run(std::cin);
  } else {
    std::ifstream in(o.in);
    if (!in) throw DataError("cannot read " + o.in);
    run(in);
  }
  write_file(o.out, bytes);
  return 0;
}

template <class Sketch>
Sketch load(std::span<const std::uint8_t> bytes) {
  try {
    return Sketch::deserialize(bytes);
  } catch (const std::exception& e) {
    throw DataError(std::string("bad sketch file: ") + e.what());
  }
}

template <class Sketch>
void answer_queries(const Options& o, const Sketch& s) {
  using T = typename Sketch::item_type;
  for (double phi : o.quantiles) {
    if (!(phi >= 0.0 && phi <= 1.0)) throw DataError("quantile " + fmt(phi) + " outside [0, 1]");
    if (s.empty()) throw DataError("quantile of an empty sketch");
    std::cout << fmt(phi) << '\t' << kll::ItemTraits<T>::format(s.quantile(phi)) << '\n';
  }
  for (const auto& v : o.ranks) {
    T q;
    try {
      q = kll::ItemTraits<T>::parse(v);
    } catch (const std::exception& e) {
      throw DataError(std::string("rank query: ") + e.what());
    }
    std::cout << v << '\t' << fmt(s.rank(q).normalized()) << '\n';
  }
  if (!o.cdf.empty()) {
    std::ifstream in(o.cdf);
    if (!in) throw DataError("cannot read " + o.cdf);
    std::vector<T> queries;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      try {
        queries.push_back(kll::ItemTraits<T>::parse(line));
      } catch (const std::exception& e) {
        throw DataError("line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    if (!std::is_sorted(queries.begin(), queries.end())) throw DataError("cdf queries must be sorted");
    for (double f : s.cdf(queries)) std::cout << fmt(f) << '\n';
  }
}

template <class T>
void query_typed(const Options& o, const std::vector<std::uint8_t>& bytes, WeightedMode mode) {
  if (mode == WeightedMode::WeightAware) {
    answer_queries(o, load<kll::WeightAwareSketch<T>>(bytes));
  } else {
    answer_queries(o, load<kll::KllSketch<T>>(bytes));
  }
}

kll::SketchHeader header_of(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  try {
    return kll::peek_header(bytes);
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

int cmd_query(const Options& o) {
  const auto bytes = read_file(o.sketch);
  const auto h = header_of(bytes, o.sketch);
  if (h.codec == 1) {
    query_typed<std::string>(o, bytes, h.mode);
  } else {
    query_typed<double>(o, bytes, h.mode);
  }
  return 0;
}

template <class Sketch>
std::vector<std::uint8_t> merge_all(const std::vector<std::vector<std::uint8_t>>& files) {
  Sketch acc = load<Sketch>(files[0]);
  for (std::size_t i = 1; i < files.size(); ++i) acc = Sketch::merge(acc, load<Sketch>(files[i]));
  return acc.serialize();
}

int cmd_merge(const Options& o) {
  std::vector<std::vector<std::uint8_t>> files;
  std::vector<kll::SketchHeader> headers;
  for (const auto& p : o.merge_inputs) {
    files.push_back(read_file(p));
    headers.push_back(header_of(files.back(), p));
  }
  const auto& h0 = headers[0];
  for (std::size_t i = 1; i < headers.size(); ++i) {
    const auto& h = headers[i];
    auto mismatch = [&](const std::string& field, const std::string& a, const std::string& b) {
      throw DataError("cannot merge: field '" + field + "' differs (" + o.merge_inputs[0] + ": " + a + ", " +
                      o.merge_inputs[i] + ": " + b + ")");
    };
    if (h.codec != h0.codec) mismatch("codec", std::to_string(h0.codec), std::to_string(h.codec));
    if (h.mode != h0.mode) mismatch("weighted", std::string(to_string(h0.mode)), std::string(to_string(h.mode)));
    if (h.flags != h0.flags) mismatch("variant", h0.flags.digits(), h.flags.digits());
    if (h.c != h0.c) mismatch("c", fmt(h0.c), fmt(h.c));
  }
  std::vector<std::uint8_t> out;
  if (h0.mode == WeightedMode::WeightAware) {
    out = h0.codec == 1 ? merge_all<kll::WeightAwareSketch<std::string>>(files)
                        : merge_all<kll::WeightAwareSketch<double>>(files);
  } else {
    out = h0.codec == 1 ? merge_all<kll::KllSketch<std::string>>(files) : merge_all<kll::KllSketch<double>>(files);
  }
  write_file(o.out, out);
  return 0;
}

int cmd_info(const Options& o) {
  const auto bytes = read_file(o.sketch);
  const auto h = header_of(bytes, o.sketch);
  std::cout << "variant " << h.flags.digits() << '\n'
            << "weighted " << to_string(h.mode) << '\n'
            << "codec " << (h.codec == 1 ? "string" : "f64") << '\n'
            << "k " << h.k << '\n'
            << "budget " << h.budget << '\n'
            << "c " << fmt(h.c) << '\n'
            << "H " << h.H << '\n'
            << "H_s " << h.H_s << '\n'
            << "n " << h.n_total << '\n'
            << "items " << h.items_n << '\n'
            << "bytes " << bytes.size() << '\n';
  return 0;
}

kll::VariantSpec parse_variant_spec(const std::string& token, WeightedMode default_mode) {
  kll::VariantSpec v;
  const auto slash = token.find('/');
  v.flags = VariantFlags::parse(token.substr(0, slash));
  v.mode = slash == std::string::npos ? default_mode : kll::parse_weighted_mode(token.substr(slash + 1));
  return v;
}

int cmd_eval(const Options& o) {
  kll::ExperimentMatrix m;
  const WeightedMode default_mode = kll::parse_weighted_mode(o.weighted);
  for (const auto& t : o.variants) m.variants.push_back(parse_variant_spec(t, default_mode));
  m.budgets = o.budgets;
  for (const auto& s : o.streams) {
    kll::StreamSpec spec;
    spec.kind = kll::parse_stream_kind(s);
    spec.n = o.n;
    spec.noise = o.noise;
    spec.trend = o.trend;
    spec.step = o.step;
    spec.path = o.path;
    m.streams.push_back(spec);
  }
  m.trials = o.trials;
  m.master_seed = o.seed;
  m.c = o.c;
  m.backend = kll::parse_backend(o.backend);
  m.max_weight = o.max_weight;
  m.q_count = o.q_count;
  m.threads = o.threads;
  auto run = [&](std::ostream& out) {
    kll::write_csv_header(out);
    try {
      kll::run_experiment(m, &out);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
  };
  if (o.out.empty() || o.out == "-") {
    run(std::cout);
  } else {
    std::ofstream out(o.out);
    if (!out) throw DataError("cannot write " + o.out);
    run(out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KLL quantile sketches: build, query, merge, inspect, evaluate"};
  app.require_subcommand(1, 1);
  Options o;

  auto variant_check = CLI::Validator(
      [](std::string& s) -> std::string {
        if (s.size() != 4 || s.find_first_not_of("01") != std::string::npos) return "variant must match [01]{4}";
        return {};
      },
      "[01]{4}");
  auto decay_check = CLI::Validator(
      [](std::string& s) -> std::string {
        double c = 0;
        try {
          c = std::stod(s);
        } catch (...) {
          return "c must be a number";
        }
        if (!(c > 0.5 && c < 1.0)) return "c must lie in (0.5, 1)";
        return {};
      },
      "(0.5,1)");
  const auto modes = CLI::IsMember({"none", "base2", "weight-aware"});
  const auto backends = CLI::IsMember({"list", "packed"});

  auto add_sketch_params = [&](CLI::App* sub) {
    sub->add_option("--budget", o.budget, "total item slots")->check(CLI::Range(8u, 1u << 30));
    sub->add_option("--c", o.c, "capacity decay rate")->check(decay_check);
    sub->add_option("--variant", o.variant, "lazy/anti/spread/sweep digits")->check(variant_check);
    sub->add_option("--backend", o.backend, "list or packed")->check(backends);
    sub->add_option("--weighted", o.weighted, "none, base2 or weight-aware")->check(modes);
    sub->add_option("--seed", o.seed, "RNG seed");
  };

  auto* build = app.add_subcommand("build", "stream a file into a sketch");
  add_sketch_params(build);
  build->add_option("--codec", o.codec, "item codec")->check(CLI::IsMember({"f64", "string"}));
  build->add_option("--in", o.in, "input file, one item or <weight>\\t<item> per line ('-' = stdin)");
  build->add_option("--out", o.out, "sketch file to write")->required();

  auto* query = app.add_subcommand("query", "answer queries against a sketch file");
  query->add_option("--sketch", o.sketch, "sketch file")->required();
  query->add_option("--quantiles", o.quantiles, "comma-separated phi values")->delimiter(',');
  query->add_option("--ranks", o.ranks, "comma-separated items")->delimiter(',');
  query->add_option("--cdf", o.cdf, "file of ascending query items");

  auto* merge = app.add_subcommand("merge", "merge sketch files");
  merge->add_option("inputs", o.merge_inputs, "sketch files")->required()->expected(2, -1);
  merge->add_option("--out", o.out, "sketch file to write")->required();

  auto* info = app.add_subcommand("info", "print a sketch file's header");
  info->add_option("--sketch", o.sketch, "sketch file")->required();

  auto* eval = app.add_subcommand("eval", "run an experiment matrix and print CSV");
  eval->add_option("--variants", o.variants, "variants, e.g. 0000,1111,1111/base2")
      ->delimiter(',')
      ->check(CLI::Validator(
          [](std::string& s) -> std::string {
            try {
              parse_variant_spec(s, WeightedMode::None);
            } catch (const std::exception& e) {
              return e.what();
            }
            return {};
          },
          "VARIANT[/MODE]"));
  eval->add_option("--budgets", o.budgets, "budgets")->delimiter(',')->check(CLI::Range(8u, 1u << 30));
  eval->add_option("--streams", o.streams, "sorted, shuffled, trending, brownian, file")
      ->delimiter(',')
      ->check(CLI::IsMember({"sorted", "shuffled", "trending", "brownian", "file"}));
  eval->add_option("--n", o.n, "stream length")->check(CLI::PositiveNumber);
  eval->add_option("--trials", o.trials, "trials per cell")->check(CLI::PositiveNumber);
  eval->add_option("--max-weight", o.max_weight, "uniform weights in [1, max]")->check(CLI::PositiveNumber);
  eval->add_option("--noise", o.noise, "trending noise amplitude A");
  eval->add_option("--trend", o.trend, "trending slope B");
  eval->add_option("--step", o.step, "brownian step scale");
  eval->add_option("--path", o.path, "stream file for --streams file");
  eval->add_option("--q-count", o.q_count, "quantile points per error measurement")->check(CLI::PositiveNumber);
  eval->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  eval->add_option("--c", o.c, "capacity decay rate")->check(decay_check);
  eval->add_option("--backend", o.backend, "list or packed")->check(backends);
  eval->add_option("--weighted", o.weighted, "mode for variants without a /MODE suffix")->check(modes);
  eval->add_option("--seed", o.seed, "master seed");
  eval->add_option("--out", o.out, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*build) return cmd_build(o);
    if (*query) return cmd_query(o);
    if (*merge) return cmd_merge(o);
    if (*info) return cmd_info(o);
    if (*eval) return cmd_eval(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
