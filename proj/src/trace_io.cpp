#include "inpipe/trace_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "inpipe/errors.hpp"

namespace inpipe {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_trace(const std::vector<TraceRecord>& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    const auto& s = r.state;
    const double cols[] = {r.t, s.x, s.x_dot, s.phi, s.phi_dot, s.psi, s.psi_dot};
    for (double c : cols) out << format_double(c) << ',';
    out << to_string(r.mode) << ',' << r.junction_index << ',' << format_double(r.sonar) << ','
        << format_double(r.pf_mean) << ',' << format_double(r.pf_var) << ',' << r.n_particles;
    for (int i = 0; i < 3; ++i) out << ',' << format_double(r.forces[i]);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(r.wheel_omega[i]);
    out << '\n';
  }
}

void write_trace(const std::vector<TraceRecord>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_trace(trace, out);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_field(std::string_view text, const std::string& where) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw SchemaError(where, "cannot parse '" + std::string(text) + "'");
  return v;
}

}  // namespace

std::vector<TraceRecord> read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw SchemaError("header", "unexpected trace header");
  std::vector<TraceRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split(line);
    const std::string where = "row " + std::to_string(row);
    if (f.size() != 19) throw SchemaError(where, "expected 19 columns");
    auto num = [&](std::size_t i) { return parse_field<double>(f[i], where); };
    TraceRecord r;
    r.t = num(0);
    r.state.x = num(1);
    r.state.x_dot = num(2);
    r.state.phi = num(3);
    r.state.phi_dot = num(4);
    r.state.psi = num(5);
    r.state.psi_dot = num(6);
    const auto mode = mode_from_string(f[7]);
    if (!mode) throw SchemaError(where, "unknown mode '" + std::string(f[7]) + "'");
    r.mode = *mode;
    r.junction_index = parse_field<std::size_t>(f[8], where);
    r.sonar = num(9);
    r.pf_mean = num(10);
    r.pf_var = num(11);
    r.n_particles = parse_field<std::size_t>(f[12], where);
    for (int i = 0; i < 3; ++i) r.forces[i] = num(13 + i);
    for (int i = 0; i < 3; ++i) r.wheel_omega[i] = num(16 + i);
    out.push_back(r);
  }
  return out;
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_trace(in);
}

namespace {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> y;
};

constexpr double kW = 800, kH = 300, kLeft = 70, kRight = 20, kTop = 30, kBottom = 40;

class Chart {
 public:
  Chart(std::string title, std::string ylabel, const std::vector<double>& t,
        const std::vector<Series>& series)
      : title_(std::move(title)), ylabel_(std::move(ylabel)), t_(t), series_(series) {
    t0_ = t.empty() ? 0.0 : t.front();
    t1_ = t.empty() ? 1.0 : t.back();
    if (t1_ <= t0_) t1_ = t0_ + 1.0;
    y0_ = std::numeric_limits<double>::infinity();
    y1_ = -y0_;
    for (const auto& s : series)
      for (double v : s.y)
        if (std::isfinite(v)) {
          y0_ = std::min(y0_, v);
          y1_ = std::max(y1_, v);
        }
    if (!std::isfinite(y0_)) y0_ = 0.0, y1_ = 1.0;
    if (y1_ - y0_ < 1e-12) y0_ -= 0.5, y1_ += 0.5;
    const double pad = 0.05 * (y1_ - y0_);
    y0_ -= pad;
    y1_ += pad;
  }

  double px(double t) const { return kLeft + (t - t0_) / (t1_ - t0_) * (kW - kLeft - kRight); }
  double py(double y) const { return kTop + (y1_ - y) / (y1_ - y0_) * (kH - kTop - kBottom); }

  void open(std::ostream& o) const {
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << title_
      << "</text>\n";
  }

  void axes(std::ostream& o) const {
    const double bx = kLeft, by = kH - kBottom, tx = kW - kRight;
    o << "<g stroke=\"black\" fill=\"none\"><line x1=\"" << bx << "\" y1=\"" << by << "\" x2=\""
      << tx << "\" y2=\"" << by << "\"/><line x1=\"" << bx << "\" y1=\"" << kTop << "\" x2=\""
      << bx << "\" y2=\"" << by << "\"/></g>\n";
    o << "<g font-size=\"10\">\n";
    for (int i = 0; i <= 4; ++i) {
      const double t = t0_ + (t1_ - t0_) * i / 4.0;
      const double y = y0_ + (y1_ - y0_) * i / 4.0;
      o << "<text x=\"" << px(t) << "\" y=\"" << by + 14 << "\" text-anchor=\"middle\">"
        << format_tick(t) << "</text>\n";
      o << "<text x=\"" << bx - 4 << "\" y=\"" << py(y) + 3 << "\" text-anchor=\"end\">"
        << format_tick(y) << "</text>\n";
    }
    o << "<text x=\"" << (kLeft + tx) / 2 << "\" y=\"" << kH - 6
      << "\" text-anchor=\"middle\">t [s]</text>\n";
    o << "<text x=\"14\" y=\"" << (kTop + by) / 2 << "\" transform=\"rotate(-90 14 "
      << (kTop + by) / 2 << ")\" text-anchor=\"middle\">" << ylabel_ << "</text>\n</g>\n";
  }

  void lines(std::ostream& o) const {
    double ly = kTop + 12;
    for (const auto& s : series_) {
      o << "<polyline class=\"series\" fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.2\" points=\"";
      for (std::size_t i = 0; i < s.y.size() && i < t_.size(); ++i)
        if (std::isfinite(s.y[i])) o << px(t_[i]) << ',' << py(s.y[i]) << ' ';
      o << "\"/>\n";
      o << "<text x=\"" << kW - kRight - 4 << "\" y=\"" << ly << "\" text-anchor=\"end\" fill=\""
        << s.color << "\" font-size=\"11\">" << s.label << "</text>\n";
      ly += 14;
    }
  }

 private:
  static std::string format_tick(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
  }

  std::string title_, ylabel_;
  const std::vector<double>& t_;
  const std::vector<Series>& series_;
  double t0_, t1_, y0_, y1_;
};

std::vector<std::pair<double, double>> steer_intervals(const std::vector<TraceRecord>& trace,
                                                       double dt) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].mode != Mode::JunctionSteer) continue;
    const double start = trace[i].t;
    while (i + 1 < trace.size() && trace[i + 1].mode == Mode::JunctionSteer) ++i;
    out.emplace_back(start, trace[i].t + dt);
  }
  return out;
}

std::filesystem::path write_chart(const std::filesystem::path& dir, const std::string& name,
                                  const Chart& chart,
                                  const std::vector<std::pair<double, double>>* shade = nullptr) {
  const auto path = dir / name;
  std::ofstream o(path, std::ios::binary);
  if (!o) throw IoError("cannot open " + path.string() + " for writing");
  chart.open(o);
  if (shade)
    for (const auto& [a, b] : *shade)
      o << "<rect class=\"steer\" x=\"" << chart.px(a) << "\" y=\"" << kTop << "\" width=\""
        << chart.px(b) - chart.px(a) << "\" height=\"" << kH - kTop - kBottom
        << "\" fill=\"#f4c430\" fill-opacity=\"0.3\"/>\n";
  chart.axes(o);
  chart.lines(o);
  o << "</svg>\n";
  o.flush();
  if (!o) throw IoError("write failed: " + path.string());
  return path;
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const std::vector<TraceRecord>& trace,
                                              const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<double> t;
  for (const auto& r : trace) t.push_back(r.t);
  const double dt = trace.size() > 1 ? trace[1].t - trace[0].t : 0.01;
  auto pick = [&](auto f) {
    std::vector<double> v;
    for (const auto& r : trace) v.push_back(f(r));
    return v;
  };

  std::vector<std::filesystem::path> files;
  const std::vector<Series> attitude{
      {"phi", "#1f77b4", pick([](const TraceRecord& r) { return r.state.phi; })},
      {"psi", "#d62728", pick([](const TraceRecord& r) { return r.state.psi; })}};
  files.push_back(write_chart(dir, "attitude.svg", Chart("Attitude", "rad", t, attitude)));

  const std::vector<Series> velocity{
      {"x_dot", "#2ca02c", pick([](const TraceRecord& r) { return r.state.x_dot; })}};
  files.push_back(write_chart(dir, "velocity.svg", Chart("Axial velocity", "m/s", t, velocity)));

  const auto shade = steer_intervals(trace, dt);
  const std::vector<Series> mode{
      {"mode (0 cruise, 1 steer, 2 stop)", "#000000",
       pick([](const TraceRecord& r) { return static_cast<double>(r.mode); })}};
  files.push_back(write_chart(dir, "mode.svg", Chart("Supervisor mode", "mode", t, mode), &shade));

  const std::vector<Series> pf{
      {"true x", "#7f7f7f", pick([](const TraceRecord& r) { return r.state.x; })},
      {"pf mean", "#9467bd", pick([](const TraceRecord& r) { return r.pf_mean; })}};
  files.push_back(write_chart(dir, "pf.svg", Chart("Localisation", "m", t, pf)));

  const std::vector<Series> forces{
      {"f1", "#1f77b4", pick([](const TraceRecord& r) { return r.forces[0]; })},
      {"f2", "#ff7f0e", pick([](const TraceRecord& r) { return r.forces[1]; })},
      {"f3", "#2ca02c", pick([](const TraceRecord& r) { return r.forces[2]; })}};
  files.push_back(write_chart(dir, "forces.svg", Chart("Wheel forces", "N", t, forces)));
  return files;
}

}  // namespace inpipe
