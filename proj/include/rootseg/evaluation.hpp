#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rootseg/image.hpp"
#include "rootseg/image_io.hpp"
#include "rootseg/morphology.hpp"

namespace rootseg {

/// Overlap quality Q = |S n R'| / |S|, where S is the computed skeleton and
/// R' is the reference dilated by a square of side (2 * tolerance_px + 1)
/// when tolerance_px > 0.
inline double quality(const BinaryMask& skeleton, const BinaryMask& reference,
                      int tolerance_px = 0) {
  if (!skeleton.same_extent(reference))
    throw ExtentMismatch("quality: skeleton and reference differ in extent");
  const int s_count = skeleton.count_foreground();
  if (s_count == 0) throw EmptySkeleton("quality: skeleton has no foreground pixels");
  BinaryMask dilated;
  const BinaryMask* ref = &reference;
  if (tolerance_px > 0) {
    dilated = binary_dilate(reference, 2 * tolerance_px + 1);
    ref = &dilated;
  }
  int hits = 0;
  for (int i = 0; i < skeleton.size(); ++i) hits += (skeleton.data[i] && ref->data[i]);
  return static_cast<double>(hits) / s_count;
}

/// Arithmetic mean and population standard deviation.
inline std::pair<double, double> aggregate(const std::vector<double>& values) {
  if (values.empty()) throw InvalidParams("aggregate: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

struct ManifestEntry {
  std::string image_id;
  std::string class_tag;
  std::string pred_path;
  std::string ref_path;
};

/// CSV manifest with header `image_id,class,pred_path,ref_path`.
inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open manifest " + path);
  std::string line;
  if (!std::getline(in, line)) throw UnsupportedFormat(path + ": empty manifest");
  auto strip = [](std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
  };
  if (strip(line) != "image_id,class,pred_path,ref_path")
    throw UnsupportedFormat(path + ": unexpected manifest header '" + line + "'");
  std::vector<ManifestEntry> entries;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestEntry e;
    std::getline(ss, e.image_id, ',');
    std::getline(ss, e.class_tag, ',');
    std::getline(ss, e.pred_path, ',');
    std::getline(ss, e.ref_path, ',');
    if (e.image_id.empty() || e.pred_path.empty() || e.ref_path.empty())
      throw UnsupportedFormat(path + ": malformed manifest row '" + line + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

struct QualityEntry {
  std::string image_id;
  std::string class_tag;
  double q = 0.0;
  std::string error;  // empty on success ("MissingPair: ...", "ExtentMismatch: ...")

  bool ok() const { return error.empty(); }
};

struct ClassStats {
  std::string class_tag;
  int count = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct QualityReport {
  std::vector<QualityEntry> per_image;  // sorted by image id
  std::vector<ClassStats> per_class;
  double overall_mean = 0.0;
  double overall_std = 0.0;
  int evaluated = 0;
  int failed = 0;
};

namespace detail {

inline std::string resolve_path(const std::string& base, const std::string& p) {
  std::filesystem::path fp(p);
  if (fp.is_absolute() || base.empty()) return p;
  return (std::filesystem::path(base) / fp).string();
}

}  // namespace detail

/// Pairs prediction and reference masks by manifest, computes per-image Q,
/// and aggregates per class tag and overall. Per-entry failures (missing
/// files, extent mismatches, empty skeletons) are collected, not fatal.
inline QualityReport evaluate_directory(const std::string& manifest_path,
                                        const std::string& pred_dir, const std::string& ref_dir,
                                        int tolerance_px = 0) {
  QualityReport report;
  for (const ManifestEntry& e : load_manifest(manifest_path)) {
    QualityEntry qe;
    qe.image_id = e.image_id;
    qe.class_tag = e.class_tag;
    const std::string pred = detail::resolve_path(pred_dir, e.pred_path);
    const std::string ref = detail::resolve_path(ref_dir, e.ref_path);
    try {
      if (!std::filesystem::exists(pred)) throw IoFailure("MissingPair: no prediction " + pred);
      if (!std::filesystem::exists(ref)) throw IoFailure("MissingPair: no reference " + ref);
      qe.q = quality(load_mask(pred), load_mask(ref), tolerance_px);
    } catch (const std::exception& err) {
      qe.error = err.what();
    }
    report.per_image.push_back(std::move(qe));
  }
  std::sort(report.per_image.begin(), report.per_image.end(),
            [](const QualityEntry& a, const QualityEntry& b) { return a.image_id < b.image_id; });

  std::map<std::string, std::vector<double>> by_class;
  std::vector<double> all;
  for (const QualityEntry& qe : report.per_image) {
    if (!qe.ok()) {
      ++report.failed;
      continue;
    }
    ++report.evaluated;
    by_class[qe.class_tag].push_back(qe.q);
    all.push_back(qe.q);
  }
  for (const auto& [tag, values] : by_class) {
    const auto [mean, sd] = aggregate(values);
    report.per_class.push_back({tag, static_cast<int>(values.size()), mean, sd});
  }
  if (!all.empty()) {
    const auto [mean, sd] = aggregate(all);
    report.overall_mean = mean;
    report.overall_std = sd;
  }
  return report;
}

inline nlohmann::json report_to_json(const QualityReport& report) {
  nlohmann::json j;
  j["per_image"] = nlohmann::json::array();
  for (const QualityEntry& qe : report.per_image) {
    nlohmann::json e{{"image_id", qe.image_id}, {"class", qe.class_tag}};
    if (qe.ok())
      e["quality"] = qe.q;
    else
      e["error"] = qe.error;
    j["per_image"].push_back(std::move(e));
  }
  j["per_class"] = nlohmann::json::array();
  for (const ClassStats& cs : report.per_class)
    j["per_class"].push_back({{"class", cs.class_tag},
                              {"count", cs.count},
                              {"mean", cs.mean},
                              {"std", cs.stddev}});
  j["overall"] = {{"mean", report.overall_mean},
                  {"std", report.overall_std},
                  {"evaluated", report.evaluated},
                  {"failed", report.failed}};
  j["notes"] = "std is the population standard deviation";
  return j;
}

inline void write_report_json(const QualityReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << report_to_json(report).dump(2) << "\n";
}

inline void write_report_csv(const QualityReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << "image_id,class,quality,status\n";
  for (const QualityEntry& qe : report.per_image) {
    out << qe.image_id << "," << qe.class_tag << ",";
    if (qe.ok())
      out << qe.q << ",ok\n";
    else
      out << ",\"" << qe.error << "\"\n";
  }
}

}  // namespace rootseg
