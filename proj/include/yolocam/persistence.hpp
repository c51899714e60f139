#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "yolocam/detector.hpp"
#include "yolocam/gradcam.hpp"

namespace yolocam {

/// One raw attribution map plus everything needed to re-render it later:
/// the detection, the neuron it explains and the source image location.
struct ExplanationRecord {
  std::string id;
  std::string image_id;
  std::string image_path;
  int detection_index = 0;
  Detection detection;
  Target target;
  NeuronAddress neuron;
  int map_h = 0;
  int map_w = 0;
  float raw_min = 0;
  float raw_max = 0;
  std::vector<float> payload;  // row-major h*w
};

ExplanationRecord make_record(std::string id, std::string image_id, std::string image_path,
                              int detection_index, const Detection& d,
                              const AttributionMap& map);

/// Writes records/<id>.json + records/<id>.f32 pairs under a run directory
/// and a run-level manifest listing every id with its raw extrema.
class RecordWriter {
 public:
  explicit RecordWriter(std::string run_dir);

  /// Appends one record; duplicate ids and payload/shape mismatches are
  /// rejected. Returns the record id.
  std::string write_record(const ExplanationRecord& record);

  /// Writes manifest.json. input_w/input_h are the network input size the
  /// maps were produced at (needed to re-render overlays).
  void finalize(int input_w, int input_h);

  int count() const { return static_cast<int>(ids_.size()); }

 private:
  std::string run_dir_;
  std::vector<std::string> ids_;
  std::vector<std::string> manifest_entries_;
  std::optional<float> global_min_;
  std::optional<float> global_max_;
  bool finalized_ = false;
};

struct RunData {
  std::vector<ExplanationRecord> records;
  std::optional<float> global_min;
  std::optional<float> global_max;
  int input_width = 0;
  int input_height = 0;
};

/// Streams records one by one; payloads are loaded per record and handed to
/// the callback, never held all at once.
void for_each_record(const std::string& manifest_path, bool integrity_check,
                     const std::function<void(ExplanationRecord&&)>& fn);

/// Convenience wrapper collecting the whole run.
RunData read_run(const std::string& manifest_path, bool integrity_check = true);

}  // namespace yolocam
