// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef RECSURV_IO_HPP
#define RECSURV_IO_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "recsurv/data.hpp"
#include "recsurv/model.hpp"
#include "recsurv/posterior.hpp"
#include "recsurv/sampler.hpp"
#include "recsurv/simulate.hpp"

namespace recsurv {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kChainFormatVersion = 1;
inline constexpr int kTruthFormatVersion = 1;

namespace io {

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw FormatError(where + ": cannot parse '" + s + "' as a number");
  }
  return v;
}

template <class Int>
Int parse_integer(const std::string& s, const std::string& where) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw FormatError(where + ": cannot parse '" + s + "' as an integer");
  }
  return v;
}

inline std::vector<double> parse_list(const std::string& s, const std::string& where) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& item : split(s, ',')) out.push_back(parse_double(item, where));
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row
};

// Minimal comma-separated reader: no quoting, blank lines skipped.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(table.header.size()) + " fields, found " +
                        std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.lines.push_back(lineno);
  }
  if (table.header.empty()) throw FormatError(path + ": missing header row");
  return table;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  return out;
}

}  // namespace io

// ---------------------------------------------------------------------------
// Dataset CSV
//
//   id,time,is_event,censor_time,status,x1,...,xq
//
// One row per observed event (is_event = 1, time = event time) and exactly one
// terminal row per id (is_event = 0, time = censor_time, status = observed or
// censored). censor_time, status and covariates repeat on every row of an id
// and must agree. Ids keep their order of first appearance.

struct DatasetFile {
  Dataset data;
  std::vector<std::string> ids;
};

inline DatasetFile read_dataset_csv(const std::string& path) {
  const io::CsvTable table = io::read_csv(path);
  const std::vector<std::string> fixed{"id", "time", "is_event", "censor_time", "status"};
  if (table.header.size() <= fixed.size() ||
      !std::equal(fixed.begin(), fixed.end(), table.header.begin())) {
    throw FormatError(path + ": header must be id,time,is_event,censor_time,status,x1..xq");
  }
  const std::size_t q = table.header.size() - fixed.size();
  for (std::size_t k = 0; k < q; ++k) {
    if (table.header[fixed.size() + k] != "x" + std::to_string(k + 1)) {
      throw FormatError(path + ": covariate column " + std::to_string(k + 1) + " must be named x" +
                        std::to_string(k + 1));
    }
  }

  struct Pending {
    RawIndividual raw;
    std::string status;
    bool has_terminal = false;
    std::size_t first_line = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Pending> by_id;
  std::vector<std::string> issues;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = path + ":" + std::to_string(table.lines[r]);
    const std::string& id = row[0];
    const double time = io::parse_double(row[1], where);
    const std::string& flag = row[2];
    if (flag != "0" && flag != "1") throw FormatError(where + ": is_event must be 0 or 1");
    const double censor = io::parse_double(row[3], where);
    const std::string& status = row[4];
    std::vector<double> x(q);
    for (std::size_t k = 0; k < q; ++k) x[k] = io::parse_double(row[fixed.size() + k], where);

    auto [it, inserted] = by_id.try_emplace(id);
    Pending& p = it->second;
    if (inserted) {
      order.push_back(id);
      p.raw.covariates = x;
      p.raw.censor_time = censor;
      p.first_line = table.lines[r];
    } else {
      if (x != p.raw.covariates) issues.push_back(where + ": covariates differ from earlier rows of id " + id);
      if (censor != p.raw.censor_time) issues.push_back(where + ": censor_time differs from earlier rows of id " + id);
    }
    if (!status.empty()) {
      if (status != "observed" && status != "censored") {
        issues.push_back(where + ": status must be 'observed' or 'censored'");
      } else if (!p.status.empty() && p.status != status) {
        issues.push_back(where + ": status differs from earlier rows of id " + id);
      } else {
        p.status = status;
      }
    }
    if (flag == "1") {
      if (time > censor) {
        issues.push_back(where + ": event at time " + row[1] + " is after censor_time " + row[3]);
      }
      p.raw.event_times.push_back(time);
    } else {
      if (p.has_terminal) issues.push_back(where + ": second terminal row for id " + id);
      if (time != censor) issues.push_back(where + ": terminal row time must equal censor_time");
      if (status.empty()) issues.push_back(where + ": terminal row needs a status");
      p.has_terminal = true;
    }
  }

  DatasetFile out;
  std::vector<RawIndividual> raws;
  for (const auto& id : order) {
    Pending& p = by_id[id];
    if (!p.has_terminal) {
      issues.push_back(path + ":" + std::to_string(p.first_line) + ": id " + id +
                       " has no terminal row");
      continue;
    }
    std::sort(p.raw.event_times.begin(), p.raw.event_times.end());
    p.raw.survival_observed = p.status == "observed";
    p.raw.label = "id " + id + " (" + path + ":" + std::to_string(p.first_line) + ")";
    raws.push_back(p.raw);
    out.ids.push_back(id);
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  out.data = validate_dataset(raws);
  return out;
}

inline Dataset parse_dataset_csv(const std::string& path) { return read_dataset_csv(path).data; }

inline void write_dataset_csv(const std::string& path, const Dataset& data,
                              const std::vector<std::string>& ids = {}) {
  auto out = io::open_output(path);
  out << "id,time,is_event,censor_time,status";
  for (std::size_t k = 0; k < data.q; ++k) out << ",x" << (k + 1);
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ind = data[i];
    const std::string id = ids.empty() ? std::to_string(i + 1) : ids[i];
    std::string tail = "," + io::format_double(ind.censor_time) + "," +
                       (ind.survival_observed ? "observed" : "censored");
    for (double x : ind.covariates) tail += "," + io::format_double(x);
    for (double t : ind.event_times) out << id << ',' << io::format_double(t) << ",1" << tail << '\n';
    out << id << ',' << io::format_double(ind.censor_time) << ",0" << tail << '\n';
  }
  if (!out) throw FormatError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// JSON helpers shared by chain and ground-truth files

namespace io {

using nlohmann::json;

inline json to_json(const Hyperparams& h) {
  return json{{"sigma2_beta", h.sigma2_beta}, {"sigma2_gamma", h.sigma2_gamma},
              {"sigma2_m", h.sigma2_m},       {"sigma2_delta", h.sigma2_delta},
              {"nu_sigma2", h.nu_sigma2},     {"sigma2_0", h.sigma2_0},
              {"nu_eta2", h.nu_eta2},         {"eta2_0", h.eta2_0},
              {"a_M", h.a_M},                 {"b_M", h.b_M},
              {"a_r", h.a_r},                 {"b_r", h.b_r},
              {"a_lambda", h.a_lambda},       {"b_lambda", h.b_lambda}};
}

inline Hyperparams hyper_from_json(const json& j) {
  Hyperparams h;
  h.sigma2_beta = j.at("sigma2_beta");
  h.sigma2_gamma = j.at("sigma2_gamma");
  h.sigma2_m = j.at("sigma2_m");
  h.sigma2_delta = j.at("sigma2_delta");
  h.nu_sigma2 = j.at("nu_sigma2");
  h.sigma2_0 = j.at("sigma2_0");
  h.nu_eta2 = j.at("nu_eta2");
  h.eta2_0 = j.at("eta2_0");
  h.a_M = j.at("a_M");
  h.b_M = j.at("b_M");
  h.a_r = j.at("a_r");
  h.b_r = j.at("b_r");
  h.a_lambda = j.at("a_lambda");
  h.b_lambda = j.at("b_lambda");
  return h;
}

inline json to_json(const SamplerConfig& c) {
  return json{{"iterations", c.iterations},
              {"burn_in", c.burn_in},
              {"thin", c.thin},
              {"seed", c.seed},
              {"slice_width", c.slice_width},
              {"slice_max_steps", c.slice_max_steps},
              {"aux_components", c.aux_components},
              {"move_birth", c.moves.birth},
              {"move_death", c.moves.death},
              {"move_refresh", c.moves.refresh}};
}

inline SamplerConfig sampler_from_json(const json& j) {
  SamplerConfig c;
  c.iterations = j.at("iterations");
  c.burn_in = j.at("burn_in");
  c.thin = j.at("thin");
  c.seed = j.at("seed");
  c.slice_width = j.at("slice_width");
  c.slice_max_steps = j.at("slice_max_steps");
  c.aux_components = j.at("aux_components");
  c.moves.birth = j.at("move_birth");
  c.moves.death = j.at("move_death");
  c.moves.refresh = j.at("move_refresh");
  return c;
}

inline json to_json(const RandomEffect& re) { return json::array({re.m1, re.m2, re.delta}); }

inline RandomEffect effect_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("random effect must be [m1, m2, delta]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json to_json(const Globals& g) {
  return json{{"beta", g.beta}, {"gamma", g.gamma}, {"sigma2", g.sigma2}, {"eta2", g.eta2},
              {"r", g.r},       {"lambda", g.lambda}, {"M", g.M}};
}

inline Globals globals_from_json(const json& j) {
  Globals g;
  g.beta = j.at("beta").get<std::vector<double>>();
  g.gamma = j.at("gamma").get<std::vector<double>>();
  g.sigma2 = j.at("sigma2");
  g.eta2 = j.at("eta2");
  g.r = j.at("r");
  g.lambda = j.at("lambda");
  g.M = j.at("M");
  return g;
}

}  // namespace io

// ---------------------------------------------------------------------------
// Chain files: JSON lines. The first line is a header
//
//   {"format":"recsurv-chain","version":1,"stream":..,"q":..,"individuals":..,
//    "samples":<expected record count>,"config":{..},"hyper":{..}}
//
// followed by one record per stored state:
//
//   {"iteration":..,"beta":[..],"gamma":[..],"sigma2":..,"eta2":..,"r":..,
//    "lambda":..,"M":..,"assignments":[..],"atoms":[[m1,m2,delta],..],
//    "count":[..],"tail":[[..],..],"survival":[..]}
//
// Every line, including the last, ends in '\n'.

namespace io {

inline json chain_header(const Chain& chain, long expected_samples) {
  return json{{"format", "recsurv-chain"},
              {"version", kChainFormatVersion},
              {"stream", chain.stream},
              {"q", chain.q},
              {"individuals", chain.individuals},
              {"samples", expected_samples},
              {"config", to_json(chain.config)},
              {"hyper", to_json(chain.hyper)}};
}

inline json sample_record(long iteration, const ModelState& s) {
  json rec = to_json(s.globals);
  json out = json::object();
  out["iteration"] = iteration;
  for (auto& [k, v] : rec.items()) out[k] = v;
  out["assignments"] = s.assignments;
  json atoms = json::array();
  for (const auto& a : s.atoms) atoms.push_back(to_json(a));
  out["atoms"] = std::move(atoms);
  json count = json::array();
  json tail = json::array();
  json survival = json::array();
  for (const auto& lat : s.latent) {
    count.push_back(lat.count);
    tail.push_back(lat.tail);
    survival.push_back(lat.survival);
  }
  out["count"] = std::move(count);
  out["tail"] = std::move(tail);
  out["survival"] = std::move(survival);
  return out;
}

inline ModelState state_from_record(const json& rec, std::size_t individuals) {
  ModelState s;
  s.globals = globals_from_json(rec);
  s.assignments = rec.at("assignments").get<std::vector<std::size_t>>();
  for (const auto& a : rec.at("atoms")) s.atoms.push_back(effect_from_json(a));
  const auto& count = rec.at("count");
  const auto& tail = rec.at("tail");
  const auto& survival = rec.at("survival");
  if (s.assignments.size() != individuals || count.size() != individuals ||
      tail.size() != individuals || survival.size() != individuals) {
    throw FormatError("record has the wrong number of individuals");
  }
  s.latent.resize(individuals);
  for (std::size_t i = 0; i < individuals; ++i) {
    s.latent[i].count = count[i];
    s.latent[i].tail = tail[i].get<std::vector<double>>();
    s.latent[i].survival = survival[i];
  }
  return s;
}

}  // namespace io

// Streams a chain to disk one record at a time. `header_source` supplies the
// provenance fields; the header promises `expected_samples` records.
class ChainWriter {
 public:
  ChainWriter(const std::string& path, const Chain& header_source, long expected_samples)
      : out_(io::open_output(path)), path_(path) {
    out_ << io::chain_header(header_source, expected_samples).dump() << '\n';
  }

  void write(long iteration, const ModelState& s) {
    out_ << io::sample_record(iteration, s).dump() << '\n';
    if (!out_) throw FormatError("write failed: " + path_);
  }

  void close() {
    out_.flush();
    if (!out_) throw FormatError("write failed: " + path_);
    out_.close();
  }

 private:
  std::ofstream out_;
  std::string path_;
};

inline void write_chain(const std::string& path, const Chain& chain) {
  ChainWriter writer(path, chain, static_cast<long>(chain.size()));
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const long it = k < chain.iterations.size() ? chain.iterations[k] : static_cast<long>(k + 1);
    writer.write(it, chain.samples[k]);
  }
  writer.close();
}

// Reads a chain written by write_chain. Throws FormatError naming the byte
// offset of the first unreadable record, on a version mismatch, or when the
// file holds fewer records than its header promises.
inline Chain read_chain(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Chain chain;
  long expected = -1;
  std::size_t offset = 0;
  std::size_t record = 0;
  while (offset < text.size()) {
    const std::size_t end = text.find('\n', offset);
    if (end == std::string::npos) {
      throw FormatError(path + ": truncated record at byte offset " + std::to_string(offset));
    }
    const std::string_view line(text.data() + offset, end - offset);
    io::json j;
    try {
      j = io::json::parse(line);
    } catch (const io::json::parse_error& e) {
      throw FormatError(path + ": malformed record at byte offset " + std::to_string(offset) + ": " +
                        e.what());
    }
    try {
      if (record == 0) {
        if (j.value("format", "") != "recsurv-chain") throw FormatError("not a chain file");
        const int version = j.at("version");
        if (version != kChainFormatVersion) {
          throw FormatError("unsupported chain format version " + std::to_string(version) +
                            " (expected " + std::to_string(kChainFormatVersion) + ")");
        }
        chain.stream = j.at("stream");
        chain.q = j.at("q");
        chain.individuals = j.at("individuals");
        expected = j.at("samples");
        chain.config = io::sampler_from_json(j.at("config"));
        chain.hyper = io::hyper_from_json(j.at("hyper"));
      } else {
        chain.iterations.push_back(j.at("iteration"));
        chain.samples.push_back(io::state_from_record(j, chain.individuals));
      }
    } catch (const FormatError& e) {
      throw FormatError(path + ": byte offset " + std::to_string(offset) + ": " + e.what());
    } catch (const io::json::exception& e) {
      throw FormatError(path + ": byte offset " + std::to_string(offset) + ": " + e.what());
    }
    ++record;
    offset = end + 1;
  }
  if (record == 0) throw FormatError(path + ": empty chain file");
  if (static_cast<long>(chain.size()) != expected) {
    throw FormatError(path + ": truncated at byte offset " + std::to_string(text.size()) + ": found " +
                      std::to_string(chain.size()) + " samples, header declares " +
                      std::to_string(expected));
  }
  return chain;
}

// ---------------------------------------------------------------------------
// Ground truth (single JSON document)

inline void write_ground_truth(const std::string& path, const GroundTruth& truth) {
  io::json atoms = io::json::array();
  for (const auto& a : truth.atoms) atoms.push_back(io::to_json(a));
  io::json gaps = io::json::array();
  io::json survival = io::json::array();
  for (const auto& t : truth.trajectories) {
    gaps.push_back(t.gaps);
    survival.push_back(t.survival);
  }
  io::json doc{{"format", "recsurv-truth"},   {"version", kTruthFormatVersion},
               {"globals", io::to_json(truth.globals)}, {"atoms", atoms},
               {"assignments", truth.assignments}, {"count", truth.counts},
               {"gaps", gaps},                     {"survival", survival}};
  auto out = io::open_output(path);
  out << doc.dump(1) << '\n';
  if (!out) throw FormatError("write failed: " + path);
}

inline GroundTruth read_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  io::json doc;
  try {
    doc = io::json::parse(in);
  } catch (const io::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (doc.value("format", "") != "recsurv-truth" || doc.value("version", 0) != kTruthFormatVersion) {
    throw FormatError(path + ": not a version " + std::to_string(kTruthFormatVersion) + " truth file");
  }
  GroundTruth t;
  t.globals = io::globals_from_json(doc.at("globals"));
  for (const auto& a : doc.at("atoms")) t.atoms.push_back(io::effect_from_json(a));
  t.assignments = doc.at("assignments").get<std::vector<std::size_t>>();
  t.counts = doc.at("count").get<std::vector<long>>();
  const auto& gaps = doc.at("gaps");
  const auto& survival = doc.at("survival");
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    t.trajectories.push_back({gaps[i].get<std::vector<double>>(), survival.at(i).get<double>()});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Run configuration: one `key = value` per line, '#' starts a comment.
// Unknown or repeated keys are errors. See README for the key list.

struct RunConfig {
  Hyperparams hyper;
  SamplerConfig sampler;
  std::string data_path;
  std::string out_dir;
  std::optional<SimulationConfig> simulation;
};

namespace io {

inline std::vector<RandomEffect> parse_atoms(const std::string& s, const std::string& where) {
  std::vector<RandomEffect> atoms;
  for (const auto& part : split(s, ';')) {
    if (part.empty()) continue;
    const auto v = parse_list(part, where);
    if (v.size() != 3) throw FormatError(where + ": each atom needs m1,m2,delta");
    atoms.push_back({v[0], v[1], v[2]});
  }
  return atoms;
}

}  // namespace io

inline RunConfig parse_run_config(std::istream& in, const std::string& source = "config") {
  RunConfig cfg;
  std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters;
  auto real = [&](double& field) {
    return [&field](const std::string& v, const std::string& w) { field = io::parse_double(v, w); };
  };
  auto sim = [&]() -> SimulationConfig& {
    if (!cfg.simulation) cfg.simulation.emplace();
    return *cfg.simulation;
  };
  Hyperparams& h = cfg.hyper;
  SamplerConfig& s = cfg.sampler;
  setters["sigma2_beta"] = real(h.sigma2_beta);
  setters["sigma2_gamma"] = real(h.sigma2_gamma);
  setters["sigma2_m"] = real(h.sigma2_m);
  setters["sigma2_delta"] = real(h.sigma2_delta);
  setters["nu_sigma2"] = real(h.nu_sigma2);
  setters["sigma2_0"] = real(h.sigma2_0);
  setters["nu_eta2"] = real(h.nu_eta2);
  setters["eta2_0"] = real(h.eta2_0);
  setters["a_M"] = real(h.a_M);
  setters["b_M"] = real(h.b_M);
  setters["a_r"] = real(h.a_r);
  setters["b_r"] = real(h.b_r);
  setters["a_lambda"] = real(h.a_lambda);
  setters["b_lambda"] = real(h.b_lambda);
  setters["iterations"] = [&](auto& v, auto& w) { s.iterations = io::parse_integer<long>(v, w); };
  setters["burn_in"] = [&](auto& v, auto& w) { s.burn_in = io::parse_integer<long>(v, w); };
  setters["thin"] = [&](auto& v, auto& w) { s.thin = io::parse_integer<long>(v, w); };
  setters["seed"] = [&](auto& v, auto& w) { s.seed = io::parse_integer<std::uint64_t>(v, w); };
  setters["slice_width"] = real(s.slice_width);
  setters["slice_max_steps"] = [&](auto& v, auto& w) { s.slice_max_steps = io::parse_integer<int>(v, w); };
  setters["aux_components"] = [&](auto& v, auto& w) { s.aux_components = io::parse_integer<int>(v, w); };
  setters["move_birth"] = real(s.moves.birth);
  setters["move_death"] = real(s.moves.death);
  setters["move_refresh"] = real(s.moves.refresh);
  setters["data"] = [&](auto& v, auto&) { cfg.data_path = v; };
  setters["out"] = [&](auto& v, auto&) { cfg.out_dir = v; };
  setters["sim.L"] = [&](auto& v, auto& w) { sim().L = io::parse_integer<std::size_t>(v, w); };
  setters["sim.q"] = [&](auto& v, auto& w) { sim().q = io::parse_integer<std::size_t>(v, w); };
  setters["sim.beta"] = [&](auto& v, auto& w) { sim().beta = io::parse_list(v, w); };
  setters["sim.gamma"] = [&](auto& v, auto& w) { sim().gamma = io::parse_list(v, w); };
  setters["sim.atoms"] = [&](auto& v, auto& w) { sim().cluster_atoms = io::parse_atoms(v, w); };
  setters["sim.r"] = [&](auto& v, auto& w) { sim().r = io::parse_double(v, w); };
  setters["sim.lambda"] = [&](auto& v, auto& w) { sim().lambda = io::parse_double(v, w); };
  setters["sim.sigma2"] = [&](auto& v, auto& w) { sim().sigma2 = io::parse_double(v, w); };
  setters["sim.eta2"] = [&](auto& v, auto& w) { sim().eta2 = io::parse_double(v, w); };
  setters["sim.censor_rate"] = [&](auto& v, auto& w) { sim().censor_rate = io::parse_double(v, w); };
  setters["sim.seed"] = [&](auto& v, auto& w) { sim().seed = io::parse_integer<std::uint64_t>(v, w); };

  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string content = io::trim(std::string_view(line).substr(0, hash));
    if (content.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw FormatError(where + ": expected key = value");
    const std::string key = io::trim(std::string_view(content).substr(0, eq));
    const std::string value = io::trim(std::string_view(content).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw FormatError(where + ": unknown key '" + key + "'");
    if (auto [prev, fresh] = seen.try_emplace(key, lineno); !fresh) {
      throw FormatError(where + ": key '" + key + "' already set on line " + std::to_string(prev->second));
    }
    it->second(value, where + " (" + key + ")");
  }
  cfg.hyper.validate();
  cfg.sampler.validate();
  if (cfg.simulation) cfg.simulation->validate();
  return cfg;
}

inline RunConfig read_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return parse_run_config(in, path);
}

// ---------------------------------------------------------------------------
// Summary tables

inline void write_count_summary(const std::string& path, const Chain& chain, const DatasetFile& file,
                                double level = 0.95) {
  auto out = io::open_output(path);
  out << "id,mean,lower,upper,n_i,censored\n";
  for (std::size_t i = 0; i < file.data.size(); ++i) {
    const auto s = summarize_scalar(chain, [i](const ModelState& st) { return st.latent[i].count; }, level);
    const auto& ind = file.data[i];
    out << file.ids[i] << ',' << io::format_double(s.mean) << ',' << io::format_double(s.lower) << ','
        << io::format_double(s.upper) << ',' << ind.observed_events() << ','
        << (ind.censored() ? 1 : 0) << '\n';
  }
}

inline void write_coefficient_summary(const std::string& path, const Chain& chain, double level = 0.95) {
  auto out = io::open_output(path);
  out << "parameter,mean,lower,upper\n";
  auto row = [&](const std::string& name, auto extract) {
    const auto s = summarize_scalar(chain, extract, level);
    out << name << ',' << io::format_double(s.mean) << ',' << io::format_double(s.lower) << ','
        << io::format_double(s.upper) << '\n';
  };
  for (std::size_t k = 0; k < chain.q; ++k) {
    row("beta_" + std::to_string(k + 1), [k](const ModelState& s) { return s.globals.beta[k]; });
  }
  for (std::size_t k = 0; k < chain.q; ++k) {
    row("gamma_" + std::to_string(k + 1), [k](const ModelState& s) { return s.globals.gamma[k]; });
  }
  row("sigma2", [](const ModelState& s) { return s.globals.sigma2; });
  row("eta2", [](const ModelState& s) { return s.globals.eta2; });
  row("r", [](const ModelState& s) { return s.globals.r; });
  row("lambda", [](const ModelState& s) { return s.globals.lambda; });
  row("M", [](const ModelState& s) { return s.globals.M; });
  row("clusters", [](const ModelState& s) { return static_cast<double>(s.clusters()); });
}

inline void write_matrix_csv(const std::string& path, const SquareMatrix& m, const std::vector<std::string>& ids) {
  auto out = io::open_output(path);
  out << "id";
  for (const auto& id : ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << ids[i];
    for (std::size_t j = 0; j < m.size(); ++j) out << ',' << io::format_double(m(i, j));
    out << '\n';
  }
}

inline void write_partition_csv(const std::string& path, const Partition& p, const std::vector<std::string>& ids) {
  auto out = io::open_output(path);
  out << "id,cluster\n";
  for (std::size_t i = 0; i < p.labels.size(); ++i) out << ids[i] << ',' << p.labels[i] << '\n';
}

inline void write_cluster_counts_csv(const std::string& path, const Chain& chain) {
  auto out = io::open_output(path);
  out << "clusters,frequency\n";
  for (const auto& [k, n] : cluster_count_distribution(chain)) out << k << ',' << n << '\n';
}

inline void write_kaplan_meier_csv(const std::string& path, const std::vector<ClusterCurve>& curves) {
  auto out = io::open_output(path);
  out << "cluster,cluster_size,time,survival,at_risk,events\n";
  for (const auto& c : curves) {
    for (const auto& pt : c.curve) {
      out << c.cluster << ',' << c.size << ',' << io::format_double(pt.time) << ','
          << io::format_double(pt.survival) << ',' << pt.at_risk << ',' << pt.events << '\n';
    }
  }
}

inline void write_effect_draws_csv(const std::string& path, const std::vector<RandomEffect>& draws) {
  auto out = io::open_output(path);
  out << "m1,m2,delta\n";
  for (const auto& d : draws) {
    out << io::format_double(d.m1) << ',' << io::format_double(d.m2) << ',' << io::format_double(d.delta)
        << '\n';
  }
}

// Gaps are written as one ';'-separated field. Incomplete draws leave S,
// log_S and gaps empty.
inline void write_outcome_draws_csv(const std::string& path, const std::vector<PredictiveOutcome>& draws) {
  auto out = io::open_output(path);
  out << "draw,N,S,log_S,gaps,complete\n";
  for (std::size_t d = 0; d < draws.size(); ++d) {
    const auto& o = draws[d];
    out << d + 1 << ',' << o.count << ',';
    if (o.complete) {
      out << io::format_double(o.survival) << ',' << io::format_double(std::log(o.survival)) << ',';
      for (std::size_t j = 0; j < o.gaps.size(); ++j) out << (j ? ";" : "") << io::format_double(o.gaps[j]);
    } else {
      out << ",,";
    }
    out << ',' << (o.complete ? 1 : 0) << '\n';
  }
}

}  // namespace recsurv

#endif
