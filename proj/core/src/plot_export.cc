#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "anchorloc/errors.h"
#include "anchorloc/pipeline.h"

namespace anchorloc {
namespace {

std::string Num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const char* Color(Provenance p) {
  switch (p) {
    case Provenance::kAnchorGlobal:
      return "#1f77b4";
    case Provenance::kAnchorTemporal:
      return "#2ca02c";
    case Provenance::kRefined:
      return "#ff7f0e";
    case Provenance::kUnlocalized:
      return "#d62728";
  }
  return "#000000";
}

}  // namespace

void WriteTrajectoryCsv(const std::filesystem::path& path, const Trajectory& estimate,
                        const Trajectory& ground_truth,
                        const std::map<FrameId, Provenance>& provenance) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame_id,provenance,est_x,est_y,est_z,gt_x,gt_y,gt_z,translation_error,"
         "rotation_error_deg\n";
  std::map<FrameId, int> ids;
  for (const auto& [id, p] : estimate) ids[id] = 0;
  for (const auto& [id, p] : ground_truth) ids[id] = 0;
  for (const auto& [id, p] : provenance) ids[id] = 0;
  for (const auto& [id, unused] : ids) {
    const auto e = estimate.find(id);
    const auto g = ground_truth.find(id);
    const auto pv = provenance.find(id);
    out << id << ','
        << (pv != provenance.end() ? ToString(pv->second)
                                   : ToString(e != estimate.end() ? Provenance::kRefined
                                                                  : Provenance::kUnlocalized));
    auto center = [&out](const Trajectory& t, Trajectory::const_iterator it) {
      for (int i = 0; i < 3; ++i) out << ',' << (it != t.end() ? Num(it->second.Center()[i]) : "");
    };
    center(estimate, e);
    center(ground_truth, g);
    if (e != estimate.end() && g != ground_truth.end()) {
      out << ',' << Num(TranslationError(e->second, g->second)) << ','
          << Num(RotationErrorDeg(e->second, g->second));
    } else {
      out << ",,";
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::string TrajectorySvg(const Trajectory& estimate, const Trajectory& ground_truth,
                          const std::map<FrameId, Provenance>& provenance) {
  constexpr double kSize = 600.0;
  constexpr double kMargin = 20.0;
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  auto grow = [&](const Trajectory& t) {
    for (const auto& [id, p] : t) {
      const auto c = p.Center();
      lo_x = std::min(lo_x, c.x());
      hi_x = std::max(hi_x, c.x());
      lo_y = std::min(lo_y, c.y());
      hi_y = std::max(hi_y, c.y());
    }
  };
  grow(estimate);
  grow(ground_truth);
  if (!std::isfinite(lo_x)) lo_x = lo_y = 0.0, hi_x = hi_y = 1.0;
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
  const double scale = (kSize - 2 * kMargin) / span;
  auto sx = [&](double x) { return kMargin + (x - lo_x) * scale; };
  auto sy = [&](double y) { return kSize - kMargin - (y - lo_y) * scale; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\""
      << kSize << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!ground_truth.empty()) {
    svg << "<polyline fill=\"none\" stroke=\"#999999\" stroke-width=\"1.5\" points=\"";
    for (const auto& [id, p] : ground_truth) {
      const auto c = p.Center();
      svg << Num(sx(c.x())) << ',' << Num(sy(c.y())) << ' ';
    }
    svg << "\"/>\n";
  }
  for (const auto& [id, p] : estimate) {
    const auto c = p.Center();
    const auto pv = provenance.find(id);
    const Provenance tag = pv != provenance.end() ? pv->second : Provenance::kRefined;
    svg << "<circle cx=\"" << Num(sx(c.x())) << "\" cy=\"" << Num(sy(c.y()))
        << "\" r=\"2.5\" fill=\"" << Color(tag) << "\"><title>" << id << ' '
        << ToString(tag) << "</title></circle>\n";
  }
  double y = kMargin;
  for (auto tag : {Provenance::kAnchorGlobal, Provenance::kAnchorTemporal,
                   Provenance::kRefined}) {
    svg << "<circle cx=\"" << kMargin << "\" cy=\"" << y << "\" r=\"4\" fill=\""
        << Color(tag) << "\"/><text x=\"" << kMargin + 8 << "\" y=\"" << y + 4
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << ToString(tag)
        << "</text>\n";
    y += 16;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace anchorloc
