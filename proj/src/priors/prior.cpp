#include "spg/priors/prior.hpp"

#include <filesystem>

namespace spg::priors {

namespace fs = std::filesystem;

PriorKind prior_kind_from_string(const std::string& s) {
  if (s == "acoustic") return PriorKind::acoustic;
  if (s == "linguistic") return PriorKind::linguistic;
  if (s == "external") return PriorKind::external;
  throw ConfigError("unknown prior kind '" + s + "' (acoustic, linguistic or external)");
}

std::string to_string(PriorKind k) {
  switch (k) {
    case PriorKind::acoustic: return "acoustic";
    case PriorKind::linguistic: return "linguistic";
    default: return "external";
  }
}

Mat<float> ExternalFeatures::features_for(const std::string& utt_id) const {
  std::string path = (fs::path(dir_) / (utt_id + ".spgb")).string();
  std::vector<nn::TensorBlob> blobs;
  nlohmann::json meta = nn::read_blob_file(path, blobs);
  if (meta.value("kind", "") != "features")
    throw DataError("not a feature file: " + path);
  for (const auto& b : blobs) {
    if (b.name != "features") continue;
    if (b.dims.size() != 2) throw DataError("feature tensor must be 2-D in " + path);
    Mat<float> m(int(b.dims[0]), int(b.dims[1]));
    m.v.assign(b.data.begin(), b.data.end());
    return m;
  }
  throw DataError("feature file has no 'features' tensor: " + path);
}

void ExternalFeatures::write_features(const std::string& dir, const std::string& utt_id,
                                      const Mat<float>& feats) {
  fs::create_directories(dir);
  nn::TensorBlob b;
  b.name = "features";
  b.dims = {uint32_t(feats.rows), uint32_t(feats.cols)};
  b.data = feats.v;
  nlohmann::json meta = {{"kind", "features"}, {"utt", utt_id}};
  nn::write_blob_file((fs::path(dir) / (utt_id + ".spgb")).string(), meta, {b});
}

}  // namespace spg::priors
