#include "gcl/config_file.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gcl/errors.hpp"
#include "gcl/text.hpp"

namespace gcl {

namespace {

[[noreturn]] void fail(const std::string& origin, std::size_t line, const std::string& msg) {
  throw ParseError(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_num(const std::string& origin, std::size_t line, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    fail(origin, line, "expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

std::int64_t parse_int(const std::string& origin, std::size_t line, std::string_view v) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(origin, line, "expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_switch(const std::string& origin, std::size_t line, std::string_view v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  fail(origin, line, "expected on/off, got '" + std::string(v) + "'");
}

}  // namespace

RunConfig parse_config_text(std::string_view text, const std::string& origin) {
  RunConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "data" && section != "model" && section != "train" && section != "gcl" &&
          section != "sampler" && section != "eval") {
        fail(origin, line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(origin, line_no, "expected key = value");
    const std::string key{trim(line.substr(0, eq))};
    const std::string value{trim(line.substr(eq + 1))};
    if (section.empty()) fail(origin, line_no, "key '" + key + "' outside any section");

    TrainConfig& t = cfg.train;
    if (section == "data") {
      if (key == "train") cfg.train_csv = value;
      else if (key == "test") cfg.test_csv = value;
      else fail(origin, line_no, "unknown key '" + key + "' in [data]");
    } else if (section == "model") {
      if (key == "hidden_dims") {
        t.hidden_dims.clear();
        for (const auto& cell : split(value, ',')) {
          t.hidden_dims.push_back(static_cast<int>(parse_int(origin, line_no, trim(cell))));
        }
      } else if (key == "embed_dim") {
        t.embed_dim = static_cast<int>(parse_int(origin, line_no, value));
      } else {
        fail(origin, line_no, "unknown key '" + key + "' in [model]");
      }
    } else if (section == "train") {
      if (key == "iters_stage1") t.iters_stage1 = parse_int(origin, line_no, value);
      else if (key == "iters_stage2") t.iters_stage2 = parse_int(origin, line_no, value);
      else if (key == "lr") t.lr = parse_num(origin, line_no, value);
      else if (key == "momentum") t.momentum = parse_num(origin, line_no, value);
      else if (key == "lr_decay") t.lr_decay = parse_num(origin, line_no, value);
      else if (key == "milestone_fracs") {
        t.milestone_fracs.clear();
        for (const auto& cell : split(value, ',')) {
          t.milestone_fracs.push_back(parse_num(origin, line_no, trim(cell)));
        }
      } else if (key == "batch_size") t.batch_size = static_cast<int>(parse_int(origin, line_no, value));
      else if (key == "seed") t.seed = static_cast<std::uint64_t>(parse_int(origin, line_no, value));
      else if (key == "mixup") t.mixup = parse_switch(origin, line_no, value);
      else if (key == "mixup_alpha") t.mixup_alpha = parse_num(origin, line_no, value);
      else if (key == "loss") {
        try {
          t.loss = parse_loss_kind(value);
        } catch (const ParseError& e) {
          fail(origin, line_no, e.what());
        }
      } else fail(origin, line_no, "unknown key '" + key + "' in [train]");
    } else if (section == "gcl") {
      if (key == "scale") t.gcl.scale = parse_num(origin, line_no, value);
      else if (key == "noise_mean") t.gcl.noise_mean = parse_num(origin, line_no, value);
      else if (key == "noise_std") t.gcl.noise_std = parse_num(origin, line_no, value);
      else if (key == "clamp_lo") t.gcl.clamp_lo = parse_num(origin, line_no, value);
      else if (key == "clamp_hi") t.gcl.clamp_hi = parse_num(origin, line_no, value);
      else if (key == "pow_exponent") t.gcl.pow_exponent = parse_num(origin, line_no, value);
      else if (key == "strategy") {
        try {
          t.gcl.strategy = parse_cloud_strategy(value);
        } catch (const ParseError& e) {
          fail(origin, line_no, e.what());
        }
      } else fail(origin, line_no, "unknown key '" + key + "' in [gcl]");
    } else if (section == "sampler") {
      if (key == "strategy") {
        try {
          t.sampler.strategy = parse_sampler_strategy(value);
        } catch (const ParseError& e) {
          fail(origin, line_no, e.what());
        }
      } else if (key == "a") t.sampler.a = parse_num(origin, line_no, value);
      else if (key == "b") t.sampler.b = parse_num(origin, line_no, value);
      else if (key == "en_beta") t.sampler.en_beta = parse_num(origin, line_no, value);
      else fail(origin, line_no, "unknown key '" + key + "' in [sampler]");
    } else if (section == "eval") {
      if (key == "many_gt") cfg.groups.many_gt = parse_int(origin, line_no, value);
      else if (key == "few_lt") cfg.groups.few_lt = parse_int(origin, line_no, value);
      else fail(origin, line_no, "unknown key '" + key + "' in [eval]");
    }
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string render_config(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  std::ostringstream out;
  out << "[data]\n";
  out << "train = " << cfg.train_csv << "\n";
  out << "test = " << cfg.test_csv << "\n";
  out << "\n[model]\n";
  out << "hidden_dims = ";
  for (std::size_t i = 0; i < t.hidden_dims.size(); ++i) {
    out << (i ? "," : "") << t.hidden_dims[i];
  }
  out << "\nembed_dim = " << t.embed_dim << "\n";
  out << "\n[train]\n";
  out << "iters_stage1 = " << t.iters_stage1 << "\n";
  out << "iters_stage2 = " << t.iters_stage2 << "\n";
  out << "lr = " << fmt_g17(t.lr) << "\n";
  out << "momentum = " << fmt_g17(t.momentum) << "\n";
  out << "lr_decay = " << fmt_g17(t.lr_decay) << "\n";
  out << "milestone_fracs = ";
  for (std::size_t i = 0; i < t.milestone_fracs.size(); ++i) {
    out << (i ? "," : "") << fmt_g17(t.milestone_fracs[i]);
  }
  out << "\nbatch_size = " << t.batch_size << "\n";
  out << "seed = " << t.seed << "\n";
  out << "mixup = " << (t.mixup ? "on" : "off") << "\n";
  out << "mixup_alpha = " << fmt_g17(t.mixup_alpha) << "\n";
  out << "loss = " << loss_kind_name(t.loss) << "\n";
  out << "\n[gcl]\n";
  out << "scale = " << fmt_g17(t.gcl.scale) << "\n";
  out << "noise_mean = " << fmt_g17(t.gcl.noise_mean) << "\n";
  out << "noise_std = " << fmt_g17(t.gcl.noise_std) << "\n";
  out << "clamp_lo = " << fmt_g17(t.gcl.clamp_lo) << "\n";
  out << "clamp_hi = " << fmt_g17(t.gcl.clamp_hi) << "\n";
  out << "strategy = " << cloud_strategy_name(t.gcl.strategy) << "\n";
  out << "pow_exponent = " << fmt_g17(t.gcl.pow_exponent) << "\n";
  out << "\n[sampler]\n";
  out << "strategy = " << sampler_strategy_name(t.sampler.strategy) << "\n";
  out << "a = " << fmt_g17(t.sampler.a) << "\n";
  out << "b = " << fmt_g17(t.sampler.b) << "\n";
  out << "en_beta = " << fmt_g17(t.sampler.en_beta) << "\n";
  out << "\n[eval]\n";
  out << "many_gt = " << cfg.groups.many_gt << "\n";
  out << "few_lt = " << cfg.groups.few_lt << "\n";
  return out.str();
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(render_config(cfg)); }

}  // namespace gcl
