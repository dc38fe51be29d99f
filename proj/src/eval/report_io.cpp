// Copyright 2026 The Divdec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "divdec/eval.hpp"

namespace divdec {
namespace {

constexpr std::string_view kHeader = "divdec-eval-report 1";

std::string real(double v) { return fmt::format("{:.17g}", v); }

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

void write_point(std::ostream& out, std::string_view role, const MetricPoint& p) {
  if (p.config_label.empty() || p.config_label.find_first_of("\t\n") != std::string::npos) {
    throw UsageError(fmt::format("config label '{}' cannot be written to a report", p.config_label));
  }
  out << role << "\tlabel=" << p.config_label << "\tprobe=" << to_string(p.probe_kind)
      << "\tforget=" << real(p.forget_metric) << "\tutility=" << real(p.utility_metric)
      << "\tclipped=" << p.clip_count << "\tretain=" << real(p.retain_metric);
  if (p.original_forget_metric) out << "\toriginal=" << real(*p.original_forget_metric);
  out << '\n';
}

class LineParser {
 public:
  LineParser(std::vector<std::string> fields, std::size_t line_no)
      : fields_(std::move(fields)), line_no_(line_no) {}

  bool done() const { return next_ >= fields_.size(); }
  bool peek(std::string_view key) const {
    return !done() && fields_[next_].compare(0, key.size() + 1, std::string(key) + "=") == 0;
  }

  std::string take(std::string_view key) {
    if (!peek(key)) fail(fmt::format("expected field '{}'", key));
    return fields_[next_++].substr(key.size() + 1);
  }

  double take_real(std::string_view key) {
    const std::string text = take(key);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
      fail(fmt::format("bad number '{}' for field '{}'", text, key));
    }
    return v;
  }

  std::size_t take_count(std::string_view key) {
    const std::string text = take(key);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (text.empty() || text[0] == '-' || end != text.c_str() + text.size() || errno == ERANGE) {
      fail(fmt::format("bad count '{}' for field '{}'", text, key));
    }
    return static_cast<std::size_t>(v);
  }

  bool take_flag(std::string_view key) {
    const std::string text = take(key);
    if (text == "1") return true;
    if (text == "0") return false;
    fail(fmt::format("flag '{}' must be 0 or 1", key));
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(fmt::format("report line {}: {}", line_no_, what));
  }

 private:
  std::vector<std::string> fields_;
  std::size_t line_no_;
  std::size_t next_ = 1;
};

MetricPoint read_point(LineParser& lp) {
  MetricPoint p;
  p.config_label = lp.take("label");
  try {
    p.probe_kind = parse_probe_kind(lp.take("probe"));
  } catch (const UsageError& e) {
    lp.fail(e.what());
  }
  p.forget_metric = lp.take_real("forget");
  p.utility_metric = lp.take_real("utility");
  p.clip_count = lp.take_count("clipped");
  p.retain_metric = lp.take_real("retain");
  if (lp.peek("original")) p.original_forget_metric = lp.take_real("original");
  if (!lp.done()) lp.fail("unexpected trailing fields");
  return p;
}

}  // namespace

void write_report(std::ostream& out, const EvalReport& report) {
  out << kHeader << '\n';
  out << "rescale\tforget=" << (report.rescale_forget ? 1 : 0) << "\tutility=" << (report.rescale_utility ? 1 : 0)
      << '\n';
  write_point(out, "target", report.target);
  write_point(out, "retrain", report.retrain);
  for (const MetricPoint& p : report.points) write_point(out, "point", p);
  out << "best\t" << report.best << '\n';
}

EvalReport read_report(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || line != kHeader) {
    throw DataError("not an eval report (missing 'divdec-eval-report 1' header)");
  }
  ++line_no;
  EvalReport report;
  bool have_rescale = false, have_target = false, have_retrain = false, have_best = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    LineParser lp(split_tabs(line), line_no);
    const std::string kind = line.substr(0, line.find('\t'));
    if (have_best) lp.fail("content after the best line");
    if (kind == "rescale") {
      report.rescale_forget = lp.take_flag("forget");
      report.rescale_utility = lp.take_flag("utility");
      if (!lp.done()) lp.fail("unexpected trailing fields");
      have_rescale = true;
    } else if (kind == "target") {
      report.target = read_point(lp);
      have_target = true;
    } else if (kind == "retrain") {
      report.retrain = read_point(lp);
      have_retrain = true;
    } else if (kind == "point") {
      report.points.push_back(read_point(lp));
    } else if (kind == "best") {
      const std::vector<std::string> fields = split_tabs(line);
      if (fields.size() != 2) lp.fail("best line takes exactly one label");
      report.best = fields[1];
      have_best = true;
    } else {
      lp.fail(fmt::format("unknown line kind '{}'", kind));
    }
  }
  if (!have_rescale || !have_target || !have_retrain || !have_best) {
    throw DataError("eval report is missing a rescale, target, retrain or best line");
  }
  return report;
}

void save_report(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write report {}", path.string()));
  write_report(out, report);
  if (!out) throw IoError(fmt::format("failed writing report {}", path.string()));
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open report {}", path.string()));
  try {
    return read_report(in);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_scatter(std::ostream& out, const EvalReport& report) {
  const std::vector<double> dist = rescaled_distances(report);
  const double fs = report.rescale_forget ? report.target.forget_metric : 1.0;
  const double us = report.rescale_utility ? report.target.utility_metric : 1.0;
  out << "role\tlabel\tforget\tutility\tforget_rescaled\tutility_rescaled\tdistance\n";
  const auto row = [&](std::string_view role, const MetricPoint& p, std::string dist_text) {
    out << role << '\t' << p.config_label << '\t' << real(p.forget_metric) << '\t' << real(p.utility_metric) << '\t'
        << real(p.forget_metric / fs) << '\t' << real(p.utility_metric / us) << '\t' << dist_text << '\n';
  };
  row("target", report.target, "");
  row("retrain", report.retrain, real(0.0));
  for (std::size_t i = 0; i < report.points.size(); ++i) {
    const MetricPoint& p = report.points[i];
    row(p.config_label == report.best ? "best" : "config", p, real(dist[i]));
  }
}

}  // namespace divdec
