#include <gtest/gtest.h>

#include <filesystem>

#include "isba/checkpoint.hpp"
#include "isba/synthetic.hpp"

using namespace isba;
namespace fs = std::filesystem;

namespace {

Dataset tiny() {
  SyntheticSpec spec;
  spec.num_videos = 2;
  spec.num_classes = 3;
  spec.dim = 6;
  spec.min_frames = 40;
  spec.max_frames = 45;
  spec.max_segments = 4;
  return generate_synthetic(spec, 11);
}

template <class S>
TrainedModel<S> quick_model(const Dataset& d, ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.depth = kind == ModelKind::mlp ? 1 : 3;
  c.conv_width = 3;
  c.encoder_filters.assign(c.depth, 5);
  c.lateral_dim = 4;
  c.num_classes = 3;
  c.input_dim = 6;
  std::vector<SoftLabelSequence> targets;
  for (const auto& v : d.videos) targets.push_back(hard_targets(v.transcript, v.features.frames(), 3));
  std::vector<TrainingExample> ex;
  for (std::size_t i = 0; i < d.videos.size(); ++i) ex.push_back({&d.videos[i].features, &targets[i]});
  TrainConfig tc;
  tc.epochs = 3;
  return train<S>(c, ex, tc);
}

fs::path dir() {
  auto p = fs::temp_directory_path() / "isba_checkpoint";
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Checkpoint, FloatForwardIsBitExactAfterReload) {
  const Dataset d = tiny();
  for (ModelKind kind : {ModelKind::tcfpn, ModelKind::edtcn, ModelKind::mlp}) {
    const auto model = quick_model<float>(d, kind);
    const auto path = dir() / ("m_" + std::string(to_string(kind)) + ".bin");
    save_checkpoint(path, model);
    const auto loaded = load_checkpoint<float>(path);
    EXPECT_EQ(loaded.config(), model.config());
    EXPECT_EQ(loaded.training_log, model.training_log);
    for (const auto& v : d.videos) {
      EXPECT_EQ(forward(model, v.features), forward(loaded, v.features));
    }
    // Saving the reloaded model reproduces the same bytes.
    EXPECT_EQ(encode_checkpoint(loaded), encode_checkpoint(model));
  }
}

TEST(Checkpoint, StartsWithMagicAndVersion) {
  const auto bytes = encode_checkpoint(quick_model<float>(tiny(), ModelKind::mlp));
  ASSERT_GE(bytes.size(), 8u);
  EXPECT_EQ(bytes.substr(0, 4), "TCFM");
  EXPECT_EQ(bytes[4], 1);
}

TEST(Checkpoint, MalformedInputsAreReported) {
  const auto bytes = encode_checkpoint(quick_model<float>(tiny(), ModelKind::tcfpn));
  auto kind_of = [](const std::string& b) {
    try {
      decode_checkpoint<float>(b, "mem");
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::io;
  };
  std::string bad = bytes;
  bad[1] = 'X';
  EXPECT_EQ(kind_of(bad), ErrorKind::format);
  EXPECT_EQ(kind_of(bytes.substr(0, bytes.size() - 2)), ErrorKind::truncated);
  EXPECT_EQ(kind_of(bytes.substr(0, bytes.size() / 2)), ErrorKind::truncated);
  EXPECT_THROW(load_checkpoint<float>(dir() / "does_not_exist.bin"), Error);
}
