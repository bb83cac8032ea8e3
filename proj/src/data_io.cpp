#include "dvtg/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "dvtg/errors.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace dvtg {

namespace {

// ---------------------------------------------------------------------------
// Little-endian primitives (explicit byte order, independent of the host)
// ---------------------------------------------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class ByteReader {
 public:
  ByteReader(std::string bytes, std::string source)
      : bytes_(std::move(bytes)), source_(std::move(source)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw DataError(source_ + ": " + std::to_string(bytes_.size() - pos_) +
                      " trailing bytes at offset " + std::to_string(pos_));
    }
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw DataError(source_ + ": truncated at byte offset " + std::to_string(pos_) +
                      " (need " + std::to_string(n) + " more, have " +
                      std::to_string(bytes_.size() - pos_) + ")");
    }
  }

  std::string bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to '" + path.string() + "'");
}

constexpr char kFeatureMagic[4] = {'D', 'V', 'T', 'F'};
constexpr char kCheckpointMagic[4] = {'D', 'V', 'T', 'C'};

struct FeatureHeader {
  std::uint32_t clips = 0;
  std::uint32_t dim = 0;
};

FeatureHeader read_feature_header(ByteReader& r, const std::string& src) {
  const std::string magic = r.raw(4);
  if (std::memcmp(magic.data(), kFeatureMagic, 4) != 0) {
    throw DataError(src + ": bad magic at byte offset 0, expected \"DVTF\"");
  }
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw DataError(src + ": unsupported feature format version " +
                    std::to_string(version));
  }
  FeatureHeader h;
  h.clips = r.u32();
  h.dim = r.u32();
  if (h.clips == 0 || h.dim == 0) {
    throw DataError(src + ": empty clip matrix (" + std::to_string(h.clips) +
                    " x " + std::to_string(h.dim) + ")");
  }
  return h;
}

}  // namespace

VideoClipFeatures load_features(const fs::path& path) {
  ByteReader r(read_file_bytes(path), path.string());
  const FeatureHeader h = read_feature_header(r, path.string());

  const std::size_t n = static_cast<std::size_t>(h.clips) * h.dim;
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    const float v = r.f32();
    if (std::isnan(v)) {
      throw DataError(path.string() + ": NaN payload at byte offset " +
                      std::to_string(at));
    }
    data[i] = static_cast<double>(v);
  }
  r.expect_end();
  return {Tensor::from_data({1, static_cast<int>(h.clips), static_cast<int>(h.dim)},
                            std::move(data))};
}

void save_features(const fs::path& path, const VideoClipFeatures& features) {
  std::string out;
  out.append(kFeatureMagic, 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(features.clip_count()));
  put_u32(out, static_cast<std::uint32_t>(features.feature_dim()));
  for (double v : features.features.data()) {
    put_f32(out, static_cast<float>(v));
  }
  write_file_bytes(path, out);
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

EmbeddingTable EmbeddingTable::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  EmbeddingTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<double> vec;
    double v;
    while (ss >> v) vec.push_back(v);
    if (word.empty() || vec.empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected 'word v1 v2 ...'");
    }
    if (table.dim_ != 0 && static_cast<int>(vec.size()) != table.dim_) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": dimension " + std::to_string(vec.size()) +
                      " differs from earlier lines (" + std::to_string(table.dim_) + ")");
    }
    table.insert(word, std::move(vec));
  }
  if (table.table_.empty()) {
    throw DataError(path.string() + ": no embeddings found");
  }
  return table;
}

void EmbeddingTable::insert(const std::string& word, std::vector<double> vec) {
  if (dim_ == 0) dim_ = static_cast<int>(vec.size());
  if (static_cast<int>(vec.size()) != dim_) {
    throw DataError("embedding for '" + word + "' has dimension " +
                    std::to_string(vec.size()) + ", table uses " +
                    std::to_string(dim_));
  }
  table_[word] = std::move(vec);
}

void EmbeddingTable::save(const fs::path& path) const {
  // Sorted for reproducible bytes.
  std::vector<const std::string*> words;
  words.reserve(table_.size());
  for (const auto& [w, v] : table_) words.push_back(&w);
  std::sort(words.begin(), words.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });

  std::ostringstream out;
  char buf[64];
  for (const std::string* w : words) {
    out << *w;
    for (double v : table_.at(*w)) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ' ' << buf;
    }
    out << '\n';
  }
  write_file_bytes(path, std::move(out).str());
}

std::vector<double> EmbeddingTable::lookup(const std::string& word) const {
  auto it = table_.find(word);
  if (it == table_.end()) {
    std::cerr << "[dvtg] warning: out-of-vocabulary word '" << word
              << "', using zero vector\n";
    return std::vector<double>(static_cast<std::size_t>(dim_), 0.0);
  }
  return it->second;
}

SentenceTokens EmbeddingTable::encode_words(
    const std::vector<std::string>& words) const {
  if (words.empty()) throw DataError("sentence must contain at least one word");
  std::vector<std::vector<double>> cols;
  cols.reserve(words.size());
  for (const std::string& w : words) cols.push_back(lookup(w));
  return SentenceTokens::from_columns(cols);
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

FeatureHeader peek_feature_header(const fs::path& path) {
  ByteReader r(read_file_bytes(path), path.string());
  return read_feature_header(r, path.string());
}

void validate_annotation_indices(const std::vector<int>& indices, int clips,
                                 const std::string& pair_id) {
  if (indices.empty()) {
    throw DataError("pair '" + pair_id + "': empty annotation");
  }
  std::vector<int> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DataError("pair '" + pair_id + "': duplicate annotation index");
  }
  if (sorted.front() < 0 || sorted.back() >= clips) {
    throw DataError("pair '" + pair_id + "': annotation index " +
                    std::to_string(sorted.back() >= clips ? sorted.back()
                                                          : sorted.front()) +
                    " out of range for " + std::to_string(clips) + " clips");
  }
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }

  DatasetManifest m;
  try {
    m.version = doc.at("version").get<int>();
    m.d_c = doc.at("d_c").get<int>();
    m.d_w = doc.at("d_w").get<int>();
    for (const auto& jp : doc.at("pairs")) {
      ManifestPair p;
      p.video_id = jp.at("video_id").get<std::string>();
      p.feature_file = jp.at("feature_file").get<std::string>();
      p.sentence = jp.at("sentence").get<std::vector<std::string>>();
      const auto& anns = jp.at("annotations");
      if (anns.size() != 4) {
        throw DataError("pair '" + p.video_id + "': expected 4 annotations, got " +
                        std::to_string(anns.size()));
      }
      for (std::size_t i = 0; i < 4; ++i) {
        p.annotations[i] = anns[i].get<std::vector<int>>();
      }
      m.pairs.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad manifest structure: " + e.what());
  }

  if (m.version != 1) {
    throw DataError(path.string() + ": unsupported manifest version " +
                    std::to_string(m.version));
  }
  if (m.d_c < 1 || m.d_w < 1) {
    throw DataError(path.string() + ": d_c and d_w must be positive");
  }

  const fs::path base = path.parent_path();
  for (const ManifestPair& p : m.pairs) {
    if (p.sentence.empty()) {
      throw DataError("pair '" + p.video_id + "': empty sentence");
    }
    const fs::path feat = base / p.feature_file;
    if (!fs::exists(feat)) {
      throw DataError("pair '" + p.video_id + "': feature file '" + feat.string() +
                      "' does not exist");
    }
    const FeatureHeader h = peek_feature_header(feat);
    if (static_cast<int>(h.dim) != m.d_c) {
      throw DataError("pair '" + p.video_id + "': feature dim " +
                      std::to_string(h.dim) + " != manifest d_c " +
                      std::to_string(m.d_c));
    }
    for (const auto& ann : p.annotations) {
      validate_annotation_indices(ann, static_cast<int>(h.clips), p.video_id);
    }
  }
  return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& m) {
  ordered_json doc;
  doc["version"] = m.version;
  doc["d_c"] = m.d_c;
  doc["d_w"] = m.d_w;
  doc["pairs"] = ordered_json::array();
  for (const ManifestPair& p : m.pairs) {
    ordered_json jp;
    jp["video_id"] = p.video_id;
    jp["feature_file"] = p.feature_file;
    jp["sentence"] = p.sentence;
    jp["annotations"] = p.annotations;
    doc["pairs"].push_back(std::move(jp));
  }
  write_file_bytes(path, doc.dump(2) + "\n");
}

std::vector<LabeledPair> load_dataset(const fs::path& manifest_path,
                                      const EmbeddingTable& embeddings) {
  const DatasetManifest m = load_manifest(manifest_path);
  if (embeddings.dim() != m.d_w) {
    throw DataError("embedding dimension " + std::to_string(embeddings.dim()) +
                    " != manifest d_w " + std::to_string(m.d_w));
  }
  const fs::path base = manifest_path.parent_path();

  std::vector<LabeledPair> pairs;
  pairs.reserve(m.pairs.size());
  for (const ManifestPair& p : m.pairs) {
    LabeledPair lp;
    lp.video_id = p.video_id;
    lp.video = load_features(base / p.feature_file);
    lp.sentence = embeddings.encode_words(p.sentence);
    const int clips = lp.video.clip_count();
    std::array<ThumbnailAnnotation, 4> anns;
    for (std::size_t i = 0; i < 4; ++i) {
      anns[i] = ThumbnailAnnotation(p.annotations[i], clips);
    }
    lp.annotations = AnnotationSet(std::move(anns));
    pairs.push_back(std::move(lp));
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

void put_tensor(std::string& out, const std::string& name, const Tensor& t) {
  put_str(out, name);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.data()) put_f64(out, v);
}

}  // namespace

void save_checkpoint(const fs::path& path, const Model& model,
                     const AdamState* adam, const CheckpointMeta& meta) {
  std::string out;
  out.append(kCheckpointMagic, 4);
  put_u32(out, 1);  // version
  put_str(out, to_string(model.variant.variant));
  put_str(out, to_string(model.variant.modulation_mode));

  const ArchConfig& a = model.arch;
  for (int c : a.block_channels) put_u32(out, static_cast<std::uint32_t>(c));
  put_u32(out, static_cast<std::uint32_t>(a.convs_per_block));
  put_u32(out, static_cast<std::uint32_t>(a.fc6_channels));
  put_u32(out, static_cast<std::uint32_t>(a.fc7_channels));
  put_u32(out, static_cast<std::uint32_t>(a.conv_kernel));
  put_u32(out, static_cast<std::uint32_t>(a.pool_size));
  put_u32(out, static_cast<std::uint32_t>(a.pool_stride));
  put_f64(out, a.dropout_p);
  put_u32(out, static_cast<std::uint32_t>(a.deconv1_kernel));
  put_u32(out, static_cast<std::uint32_t>(a.deconv1_stride));
  put_u32(out, static_cast<std::uint32_t>(a.deconv2_kernel));
  put_u32(out, static_cast<std::uint32_t>(a.deconv2_stride));

  put_u32(out, static_cast<std::uint32_t>(model.feature_dim));
  put_u32(out, static_cast<std::uint32_t>(model.embed_dim));
  put_u64(out, meta.seed);
  put_str(out, meta.rng_state);

  put_u32(out, static_cast<std::uint32_t>(model.params.count()));
  for (const auto& [name, t] : model.params) put_tensor(out, name, t);

  out.push_back(adam ? 1 : 0);
  if (adam) {
    put_u64(out, adam->step);
    put_f64(out, adam->lr);
    put_f64(out, adam->beta1);
    put_f64(out, adam->beta2);
    put_f64(out, adam->eps);
    put_u32(out, static_cast<std::uint32_t>(adam->m.size()));
    for (const auto& [name, mbuf] : adam->m) {
      put_str(out, name);
      const auto& vbuf = adam->v.at(name);
      put_u64(out, mbuf.size());
      for (double x : mbuf) put_f64(out, x);
      for (double x : vbuf) put_f64(out, x);
    }
  }
  write_file_bytes(path, out);
}

Model load_checkpoint(const fs::path& path, AdamState* adam_out,
                      CheckpointMeta* meta_out) {
  ByteReader r(read_file_bytes(path), path.string());
  const std::string magic = r.raw(4);
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
    throw DataError(path.string() + ": bad magic, expected \"DVTC\"");
  }
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw DataError(path.string() + ": unsupported checkpoint version " +
                    std::to_string(version));
  }
  const Variant variant = variant_from_string(r.str());
  const ModulationMode mode = modulation_mode_from_string(r.str());

  ArchConfig a;
  for (int i = 0; i < 5; ++i) a.block_channels[static_cast<std::size_t>(i)] = static_cast<int>(r.u32());
  a.convs_per_block = static_cast<int>(r.u32());
  a.fc6_channels = static_cast<int>(r.u32());
  a.fc7_channels = static_cast<int>(r.u32());
  a.conv_kernel = static_cast<int>(r.u32());
  a.pool_size = static_cast<int>(r.u32());
  a.pool_stride = static_cast<int>(r.u32());
  a.dropout_p = r.f64();
  a.deconv1_kernel = static_cast<int>(r.u32());
  a.deconv1_stride = static_cast<int>(r.u32());
  a.deconv2_kernel = static_cast<int>(r.u32());
  a.deconv2_stride = static_cast<int>(r.u32());

  const int d_c = static_cast<int>(r.u32());
  const int d_w = static_cast<int>(r.u32());
  CheckpointMeta meta;
  meta.seed = r.u64();
  meta.rng_state = r.str();

  VariantConfig vc = VariantConfig::make(variant);
  if (vc.has_modulation && vc.modulation_mode != mode) {
    vc = vc.with_modulation_mode(mode);
  }
  Rng scratch(0);
  Model model = Model::init(vc, a, d_c, d_w, scratch);

  const std::uint32_t n_tensors = r.u32();
  if (n_tensors != model.params.count()) {
    throw DataError(path.string() + ": checkpoint has " + std::to_string(n_tensors) +
                    " tensors, variant expects " +
                    std::to_string(model.params.count()));
  }
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = r.str();
    if (!model.params.has(name)) {
      throw DataError(path.string() + ": unexpected tensor '" + name + "'");
    }
    Tensor& t = model.params.get(name);
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(r.u32());
    if (shape != t.shape()) {
      throw DataError(path.string() + ": tensor '" + name + "' has shape " +
                      shape_str(shape) + ", expected " + shape_str(t.shape()));
    }
    for (double& v : t.data()) v = r.f64();
  }

  const std::string has_adam = r.raw(1);
  if (has_adam[0] == 1) {
    AdamState adam;
    adam.step = r.u64();
    adam.lr = r.f64();
    adam.beta1 = r.f64();
    adam.beta2 = r.f64();
    adam.eps = r.f64();
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::string name = r.str();
      const std::uint64_t len = r.u64();
      std::vector<double> m(len), v(len);
      for (auto& x : m) x = r.f64();
      for (auto& x : v) x = r.f64();
      adam.m[name] = std::move(m);
      adam.v[name] = std::move(v);
    }
    if (adam_out) *adam_out = std::move(adam);
  }
  r.expect_end();
  if (meta_out) *meta_out = std::move(meta);
  return model;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

namespace {

constexpr int kWordsPerConcept = 3;

std::string concept_word(int concept_id, int word) {
  return "c" + std::to_string(concept_id) + "w" + std::to_string(word);
}

double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Annotator variation: drop one clip, or for single-clip thumbnails swap the
// clip for an unselected one. Drops keep every annotation inside its
// concept's segment, which keeps the sentence-blind score of any fixed
// labeling at 2/3 or less.
std::vector<int> perturb_annotation(const std::vector<int>& gt, int clips, Rng& rng) {
  std::vector<int> out = gt;
  if (gt.size() >= 2) {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(rng.uniform_int(out.size())));
    return out;
  }
  if (static_cast<int>(gt.size()) < clips) {
    std::vector<int> complement;
    complement.reserve(static_cast<std::size_t>(clips) - gt.size());
    std::size_t at = 0;
    for (int i = 0; i < clips; ++i) {
      if (at < gt.size() && gt[at] == i) {
        ++at;
      } else {
        complement.push_back(i);
      }
    }
    const std::size_t victim = rng.uniform_int(out.size());
    out[victim] = complement[rng.uniform_int(complement.size())];
    std::sort(out.begin(), out.end());
  }
  return out;
}

}  // namespace

SynthOutput generate_synthetic(const SynthSpec& spec, const fs::path& out_dir) {
  if (spec.n_concepts < 2) throw DataError("synthetic data needs n_concepts >= 2");
  if (spec.max_thumb_clips < 1 || spec.max_thumb_clips > 5) {
    throw DataError("max_thumb_clips must be in [1, 5]");
  }
  if (spec.n_videos < 1 || spec.clips_per_video < 2) {
    throw DataError("need n_videos >= 1 and clips_per_video >= 2");
  }
  if (spec.d_c < 1 || spec.d_w < 1 || spec.noise_sigma < 0.0) {
    throw DataError("need d_c >= 1, d_w >= 1, noise_sigma >= 0");
  }
  // Every concept owns one contiguous run inside its own timeline slot.
  const int slot_len = spec.clips_per_video / spec.n_concepts;
  if (slot_len < 1) {
    throw DataError("infeasible spec: " + std::to_string(spec.n_concepts) +
                    " concepts cannot share " + std::to_string(spec.clips_per_video) +
                    " clips; increase clips_per_video");
  }

  fs::create_directories(out_dir / "features");
  Rng rng(spec.seed);

  // Concept prototypes (feature space) and concept words (embedding space).
  std::vector<std::vector<double>> prototypes(static_cast<std::size_t>(spec.n_concepts));
  for (auto& proto : prototypes) {
    proto.resize(static_cast<std::size_t>(spec.d_c));
    for (double& v : proto) v = snap_f32(rng.gaussian());
  }
  EmbeddingTable embeddings;
  for (int k = 0; k < spec.n_concepts; ++k) {
    for (int w = 0; w < kWordsPerConcept; ++w) {
      std::vector<double> vec(static_cast<std::size_t>(spec.d_w));
      for (double& v : vec) v = rng.gaussian();
      embeddings.insert(concept_word(k, w), std::move(vec));
    }
  }

  // Seeded per-concept segments, shared by all videos: clips of concept k sit
  // at [slot_k + offset, slot_k + offset + n_k). Videos then differ by noise
  // and by which two concepts their sentences name; each sentence's ground
  // truth is exactly its concept's segment, so the two ground truths of a
  // video are disjoint and a sentence-blind predictor cannot fit both.
  std::vector<std::vector<int>> segments(static_cast<std::size_t>(spec.n_concepts));
  for (int k = 0; k < spec.n_concepts; ++k) {
    const int max_len = std::min(spec.max_thumb_clips, slot_len);
    // Two clips minimum where the slot allows it, so annotator variation can
    // stay inside the segment (drops rather than swaps).
    const int min_len = std::min(2, max_len);
    const int len = min_len + static_cast<int>(rng.uniform_int(
                                  static_cast<std::uint64_t>(max_len - min_len + 1)));
    const int offset = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(slot_len - len + 1)));
    for (int i = 0; i < len; ++i) {
      segments[static_cast<std::size_t>(k)].push_back(k * slot_len + offset + i);
    }
  }

  DatasetManifest manifest;
  manifest.d_c = spec.d_c;
  manifest.d_w = spec.d_w;

  for (int vid = 0; vid < spec.n_videos; ++vid) {
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "video%03d", vid);
    const std::string video_id = idbuf;

    const int concept_a = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.n_concepts)));
    int concept_b = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.n_concepts - 1)));
    if (concept_b >= concept_a) ++concept_b;

    // All concept segments appear in every video; clips outside any segment
    // are neutral background.
    std::vector<std::vector<double>> rows(
        static_cast<std::size_t>(spec.clips_per_video),
        std::vector<double>(static_cast<std::size_t>(spec.d_c), 0.0));
    for (int k = 0; k < spec.n_concepts; ++k) {
      for (int i : segments[static_cast<std::size_t>(k)]) {
        rows[static_cast<std::size_t>(i)] = prototypes[static_cast<std::size_t>(k)];
      }
    }
    for (auto& row : rows) {
      for (double& v : row) v = snap_f32(v + rng.gaussian(0.0, spec.noise_sigma));
    }

    const std::string feature_file = "features/" + video_id + ".dvtf";
    save_features(out_dir / feature_file, VideoClipFeatures::from_rows(rows));

    for (int concept_id : {concept_a, concept_b}) {
      const std::vector<int>& gt = segments[static_cast<std::size_t>(concept_id)];
      ManifestPair pair;
      pair.video_id = video_id;
      pair.feature_file = feature_file;
      for (int w = 0; w < kWordsPerConcept; ++w) {
        pair.sentence.push_back(concept_word(concept_id, w));
      }
      pair.annotations[0] = gt;
      for (std::size_t i = 1; i < 4; ++i) {
        pair.annotations[i] = perturb_annotation(gt, spec.clips_per_video, rng);
      }
      manifest.pairs.push_back(std::move(pair));
    }
  }

  SynthOutput out;
  out.manifest = std::move(manifest);
  out.manifest_path = out_dir / "manifest.json";
  out.embeddings_path = out_dir / "embeddings.txt";
  save_manifest(out.manifest_path, out.manifest);
  embeddings.save(out.embeddings_path);
  return out;
}

}  // namespace dvtg
