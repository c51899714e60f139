#include "yolocam/persistence.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;

namespace yolocam {
namespace {

json box_to_json(const Box& b) {
  return {{"x_min", b.x_min}, {"y_min", b.y_min}, {"x_max", b.x_max}, {"y_max", b.y_max}};
}

Box box_from_json(const json& j) {
  return {j.at("x_min").get<float>(), j.at("y_min").get<float>(), j.at("x_max").get<float>(),
          j.at("y_max").get<float>()};
}

json detection_to_json(const Detection& d) {
  return {{"box", box_to_json(d.box)},
          {"objectness", d.objectness},
          {"class_id", d.class_id},
          {"class_prob", d.class_prob},
          {"confidence", d.confidence},
          {"provenance",
           {{"head", d.provenance.head_index},
            {"grid_y", d.provenance.grid_y},
            {"grid_x", d.provenance.grid_x},
            {"anchor", d.provenance.anchor_index}}}};
}

Detection detection_from_json(const json& j) {
  Detection d;
  d.box = box_from_json(j.at("box"));
  d.objectness = j.at("objectness").get<float>();
  d.class_id = j.at("class_id").get<int>();
  d.class_prob = j.at("class_prob").get<float>();
  d.confidence = j.at("confidence").get<float>();
  const json& p = j.at("provenance");
  d.provenance = {p.at("head").get<int>(), p.at("grid_y").get<int>(), p.at("grid_x").get<int>(),
                  p.at("anchor").get<int>()};
  return d;
}

json target_to_json(const Target& t) {
  json j{{"kind", to_string(t.kind)}};
  if (t.kind == TargetKind::class_score) j["class_id"] = t.class_id;
  return j;
}

Target target_from_json(const json& j) {
  Target t;
  t.kind = j.at("kind").get<std::string>() == "objectness" ? TargetKind::objectness
                                                           : TargetKind::class_score;
  if (t.kind == TargetKind::class_score) t.class_id = j.at("class_id").get<int>();
  return t;
}

json neuron_to_json(const NeuronAddress& n) {
  return {{"layer", n.layer_index}, {"channel", n.channel}, {"grid_y", n.grid_y},
          {"grid_x", n.grid_x}};
}

NeuronAddress neuron_from_json(const json& j) {
  return {j.at("layer").get<int>(), j.at("channel").get<int>(), j.at("grid_y").get<int>(),
          j.at("grid_x").get<int>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("persistence: cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("persistence: write to '" + path.string() + "' failed");
}

json load_json(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("persistence: cannot open " + std::string(what) + " '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("persistence: malformed " + std::string(what) + " '" + path.string() + "': " +
                e.what());
  }
  return j;
}

void validate_record(const ExplanationRecord& r) {
  if (r.id.empty()) throw Error("persistence: record id must not be empty");
  if (r.map_h < 1 || r.map_w < 1 ||
      r.payload.size() != static_cast<std::size_t>(r.map_h) * r.map_w) {
    throw Error("persistence: record '" + r.id + "' payload length " +
                std::to_string(r.payload.size()) + " does not match map shape " +
                std::to_string(r.map_h) + "x" + std::to_string(r.map_w));
  }
  const auto [lo, hi] = std::minmax_element(r.payload.begin(), r.payload.end());
  if (*lo != r.raw_min || *hi != r.raw_max) {
    throw Error("persistence: record '" + r.id + "' stored extrema [" +
                std::to_string(r.raw_min) + ", " + std::to_string(r.raw_max) +
                "] do not match payload extrema [" + std::to_string(*lo) + ", " +
                std::to_string(*hi) + "]");
  }
}

}  // namespace

ExplanationRecord make_record(std::string id, std::string image_id, std::string image_path,
                              int detection_index, const Detection& d,
                              const AttributionMap& map) {
  ExplanationRecord r;
  r.id = std::move(id);
  r.image_id = std::move(image_id);
  r.image_path = std::move(image_path);
  r.detection_index = detection_index;
  r.detection = d;
  r.target = map.target;
  r.neuron = map.neuron;
  r.map_h = map.values.extent(1);
  r.map_w = map.values.extent(2);
  r.raw_min = map.raw_min;
  r.raw_max = map.raw_max;
  r.payload.assign(map.values.data(), map.values.data() + map.values.size());
  return r;
}

RecordWriter::RecordWriter(std::string run_dir) : run_dir_(std::move(run_dir)) {
  std::error_code ec;
  fs::create_directories(fs::path(run_dir_) / "records", ec);
  if (ec) throw Error("persistence: cannot create run directory '" + run_dir_ + "'");
}

std::string RecordWriter::write_record(const ExplanationRecord& r) {
  if (finalized_) throw Error("persistence: run already finalized");
  validate_record(r);
  if (std::find(ids_.begin(), ids_.end(), r.id) != ids_.end()) {
    throw Error("persistence: duplicate record id '" + r.id + "'");
  }

  json meta{{"id", r.id},
            {"image_id", r.image_id},
            {"image_path", r.image_path},
            {"detection_index", r.detection_index},
            {"detection", detection_to_json(r.detection)},
            {"target", target_to_json(r.target)},
            {"neuron", neuron_to_json(r.neuron)},
            {"map_shape", {r.map_h, r.map_w}},
            {"raw_min", r.raw_min},
            {"raw_max", r.raw_max},
            {"blob", "records/" + r.id + ".f32"}};
  write_text(fs::path(run_dir_) / "records" / (r.id + ".json"), meta.dump(2) + "\n");

  std::ofstream blob(fs::path(run_dir_) / "records" / (r.id + ".f32"), std::ios::binary);
  if (!blob) throw Error("persistence: cannot write blob for '" + r.id + "'");
  blob.write(reinterpret_cast<const char*>(r.payload.data()),
             static_cast<std::streamsize>(r.payload.size() * sizeof(float)));
  if (!blob) throw Error("persistence: blob write failed for '" + r.id + "'");

  ids_.push_back(r.id);
  json entry{{"id", r.id},
             {"image_id", r.image_id},
             {"raw_min", r.raw_min},
             {"raw_max", r.raw_max},
             {"meta", "records/" + r.id + ".json"}};
  manifest_entries_.push_back(entry.dump());
  global_min_ = global_min_ ? std::min(*global_min_, r.raw_min) : r.raw_min;
  global_max_ = global_max_ ? std::max(*global_max_, r.raw_max) : r.raw_max;
  return r.id;
}

void RecordWriter::finalize(int input_w, int input_h) {
  json manifest{{"format", "yolocam-run/1"},
                {"input_width", input_w},
                {"input_height", input_h},
                {"records", json::array()}};
  for (const std::string& e : manifest_entries_) {
    manifest["records"].push_back(json::parse(e));
  }
  if (global_min_) {
    manifest["global_min"] = *global_min_;
    manifest["global_max"] = *global_max_;
  } else {
    manifest["global_min"] = nullptr;  // empty run: extrema are "none"
    manifest["global_max"] = nullptr;
  }
  write_text(fs::path(run_dir_) / "manifest.json", manifest.dump(2) + "\n");
  finalized_ = true;
}

void for_each_record(const std::string& manifest_path, bool integrity_check,
                     const std::function<void(ExplanationRecord&&)>& fn) {
  const fs::path root = fs::path(manifest_path).parent_path();
  const json manifest = load_json(manifest_path, "manifest");
  for (const json& entry : manifest.at("records")) {
    const std::string id = entry.at("id").get<std::string>();
    const fs::path meta_path = root / entry.at("meta").get<std::string>();
    const json meta = load_json(meta_path, "record metadata");

    ExplanationRecord r;
    r.id = meta.at("id").get<std::string>();
    r.image_id = meta.at("image_id").get<std::string>();
    r.image_path = meta.at("image_path").get<std::string>();
    r.detection_index = meta.at("detection_index").get<int>();
    r.detection = detection_from_json(meta.at("detection"));
    r.target = target_from_json(meta.at("target"));
    r.neuron = neuron_from_json(meta.at("neuron"));
    r.map_h = meta.at("map_shape").at(0).get<int>();
    r.map_w = meta.at("map_shape").at(1).get<int>();
    r.raw_min = meta.at("raw_min").get<float>();
    r.raw_max = meta.at("raw_max").get<float>();

    const fs::path blob_path = root / meta.at("blob").get<std::string>();
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) {
      throw Error("persistence: record '" + id + "' is missing its blob '" +
                  blob_path.string() + "'");
    }
    const std::size_t n = static_cast<std::size_t>(r.map_h) * r.map_w;
    r.payload.resize(n);
    blob.read(reinterpret_cast<char*>(r.payload.data()),
              static_cast<std::streamsize>(n * sizeof(float)));
    if (blob.gcount() != static_cast<std::streamsize>(n * sizeof(float))) {
      throw Error("persistence: record '" + id + "' blob is truncated");
    }

    if (integrity_check) {
      const auto [lo, hi] = std::minmax_element(r.payload.begin(), r.payload.end());
      if (*lo != r.raw_min || *hi != r.raw_max) {
        throw Error("persistence: record '" + id + "' failed the integrity check: stored extrema [" +
                    std::to_string(r.raw_min) + ", " + std::to_string(r.raw_max) +
                    "] vs payload [" + std::to_string(*lo) + ", " + std::to_string(*hi) + "]");
      }
    }
    fn(std::move(r));
  }
}

RunData read_run(const std::string& manifest_path, bool integrity_check) {
  const json manifest = load_json(manifest_path, "manifest");
  RunData run;
  run.input_width = manifest.value("input_width", 0);
  run.input_height = manifest.value("input_height", 0);
  if (manifest.contains("global_min") && !manifest.at("global_min").is_null()) {
    run.global_min = manifest.at("global_min").get<float>();
    run.global_max = manifest.at("global_max").get<float>();
  }
  for_each_record(manifest_path, integrity_check,
                  [&run](ExplanationRecord&& r) { run.records.push_back(std::move(r)); });
  return run;
}

}  // namespace yolocam
