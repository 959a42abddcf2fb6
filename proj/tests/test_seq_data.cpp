#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "isba/io.hpp"
#include "isba/synthetic.hpp"

namespace fs = std::filesystem;
using namespace isba;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "isba_seq_data" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::io;
}

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_videos = 10;
  s.num_classes = 3;
  s.min_frames = 80;
  s.max_frames = 120;
  s.dim = 8;
  s.mean_separation = 4.0;
  return s;
}

}  // namespace

TEST(Features, ThreeByTwoFile) {
  const auto dir = scratch("shape");
  FeatureSequence f(3, 2, {1, 2, 3, 4, 5, 6});
  write_features(dir / "a.tcfb", f);
  auto g = load_features(dir / "a.tcfb");
  EXPECT_EQ(g.frames(), 3u);
  EXPECT_EQ(g.dim(), 2u);
  EXPECT_EQ(g.at(2, 1), 6.0f);
  EXPECT_EQ(fs::file_size(dir / "a.tcfb"), 16u + 24u);
}

TEST(Features, RoundTripIsByteIdentical) {
  const auto dir = scratch("roundtrip");
  Rng rng(3);
  std::vector<float> values(17 * 5);
  for (auto& v : values) v = static_cast<float>(rng.normal() * 1e3);
  write_features(dir / "a.tcfb", FeatureSequence(17, 5, values));
  const std::string first = detail::read_file(dir / "a.tcfb");
  write_features(dir / "b.tcfb", load_features(dir / "a.tcfb"));
  EXPECT_EQ(first, detail::read_file(dir / "b.tcfb"));
}

TEST(Features, ErrorKindsAreDistinct) {
  const auto dir = scratch("errors");
  const std::string good = encode_features(FeatureSequence(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(kind_of([&] { load_features(dir / "missing.tcfb"); }), ErrorKind::io);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  write_text(dir / "magic.tcfb", bad_magic);
  EXPECT_EQ(kind_of([&] { load_features(dir / "magic.tcfb"); }), ErrorKind::format);

  write_text(dir / "short.tcfb", good.substr(0, good.size() - 3));
  EXPECT_EQ(kind_of([&] { load_features(dir / "short.tcfb"); }), ErrorKind::truncated);

  std::string nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 16, &q, 4);
  write_text(dir / "nan.tcfb", nan);
  EXPECT_EQ(kind_of([&] { load_features(dir / "nan.tcfb"); }), ErrorKind::non_finite);
}

TEST(Labels, TranscriptLoading) {
  const auto dir = scratch("labels");
  LabelVocab vocab({"SIL", "pour_milk"});
  write_text(dir / "t.txt", "SIL\npour_milk\nSIL\n");
  EXPECT_EQ(load_transcript(dir / "t.txt", vocab).labels, (std::vector<LabelId>{0, 1, 0}));

  write_text(dir / "one.txt", "pour_milk\n");
  EXPECT_EQ(load_transcript(dir / "one.txt", vocab).size(), 1u);

  write_text(dir / "bad.txt", "SIL\nfrobnicate\n");
  try {
    load_transcript(dir / "bad.txt", vocab);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unknown_label);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }

  write_text(dir / "empty.txt", "");
  EXPECT_THROW(load_transcript(dir / "empty.txt", vocab), Error);
}

TEST(Labels, WriterLoaderInverse) {
  const auto dir = scratch("labels_rt");
  LabelVocab vocab({"SIL", "a", "b"}, 0);
  const std::vector<LabelId> seq = {0, 0, 1, 2, 2, 0};
  write_labels(dir / "l.txt", seq, vocab);
  EXPECT_EQ(load_label_sequence(dir / "l.txt", vocab).labels, seq);
  write_vocab(dir / "v.txt", vocab);
  const std::string bytes = detail::read_file(dir / "v.txt");
  EXPECT_EQ(load_vocab(dir / "v.txt"), vocab);
  write_vocab(dir / "w.txt", load_vocab(dir / "v.txt"));
  EXPECT_EQ(detail::read_file(dir / "w.txt"), bytes);
}

TEST(Vocab, RejectsDuplicates) {
  EXPECT_THROW(LabelVocab({"a", "a"}), Error);
  EXPECT_THROW(LabelVocab({"a"}, 1), Error);
}

TEST(Collapse, Examples) {
  EXPECT_EQ(collapse(LabelSequence({0, 0, 1, 1, 0})).labels, (std::vector<LabelId>{0, 1, 0}));
  EXPECT_EQ(collapse(LabelSequence({2})).labels, (std::vector<LabelId>{2}));
  EXPECT_EQ(collapse(LabelSequence({0, 1, 1, 1, 2, 2})).labels, (std::vector<LabelId>{0, 1, 2}));
  EXPECT_THROW(collapse(std::span<const LabelId>{}), Error);
}

TEST(Collapse, Idempotent) {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    std::vector<LabelId> s(1 + rng.below(40));
    for (auto& l : s) l = static_cast<LabelId>(rng.below(3));
    const Transcript once = collapse(std::span<const LabelId>(s));
    EXPECT_EQ(collapse(once), once);
  }
}

TEST(Synthetic, ContractForSmallSpec) {
  const Dataset d = generate_synthetic(small_spec(), 7);
  ASSERT_EQ(d.videos.size(), 10u);
  EXPECT_EQ(d.num_classes(), 3u);
  for (const auto& v : d.videos) {
    ASSERT_TRUE(v.ground_truth);
    EXPECT_GE(v.features.frames(), 80u);
    EXPECT_LE(v.features.frames(), 120u);
    EXPECT_EQ(v.features.dim(), 8u);
    EXPECT_EQ(collapse(*v.ground_truth), v.transcript);
    // Every run lasts at least five frames.
    std::size_t run = 1;
    for (std::size_t t = 1; t <= v.ground_truth->size(); ++t) {
      if (t == v.ground_truth->size() || (*v.ground_truth)[t] != (*v.ground_truth)[t - 1]) {
        EXPECT_GE(run, 5u);
        run = 1;
      } else {
        ++run;
      }
    }
  }
}

TEST(Synthetic, Deterministic) {
  auto spec = small_spec();
  spec.background = true;
  spec.num_classes = 4;
  const Dataset a = generate_synthetic(spec, 42);
  const Dataset b = generate_synthetic(spec, 42);
  ASSERT_EQ(a.videos.size(), b.videos.size());
  for (std::size_t v = 0; v < a.videos.size(); ++v) {
    EXPECT_EQ(encode_features(a.videos[v].features), encode_features(b.videos[v].features));
    EXPECT_EQ(a.videos[v].ground_truth->labels, b.videos[v].ground_truth->labels);
  }
  EXPECT_NE(encode_features(a.videos[0].features),
            encode_features(generate_synthetic(spec, 43).videos[0].features));
}

TEST(Synthetic, BackgroundBracketsVideos) {
  auto spec = small_spec();
  spec.background = true;
  spec.num_classes = 5;
  const Dataset d = generate_synthetic(spec, 3);
  ASSERT_EQ(d.vocab.background(), LabelId{0});
  EXPECT_EQ(d.vocab.name(0), "SIL");
  for (const auto& v : d.videos) {
    if (v.transcript.size() >= 3) {
      EXPECT_EQ(v.transcript.labels.front(), 0u);
      EXPECT_EQ(v.transcript.labels.back(), 0u);
    }
  }
}

TEST(Synthetic, InfeasibleSpecRejected) {
  auto spec = small_spec();
  spec.min_frames = 20;
  spec.max_frames = 30;
  EXPECT_THROW(generate_synthetic(spec, 1), Error);
  spec = small_spec();
  spec.num_classes = 1;
  EXPECT_THROW(generate_synthetic(spec, 1), Error);
}

// Class means estimated from the labelled frames, then each frame assigned to
// the nearest one.
TEST(Synthetic, NearestMeanOracleSeparatesClasses) {
  const Dataset d = generate_synthetic(small_spec(), 7);
  const std::size_t k = d.num_classes(), dim = 8;
  std::vector<std::vector<double>> mean(k, std::vector<double>(dim, 0.0));
  std::vector<double> count(k, 0.0);
  for (const auto& v : d.videos) {
    for (std::size_t t = 0; t < v.features.frames(); ++t) {
      const auto c = (*v.ground_truth)[t];
      for (std::size_t j = 0; j < dim; ++j) mean[c][j] += v.features.at(t, j);
      count[c] += 1;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (auto& m : mean[c]) m /= std::max(1.0, count[c]);
  }
  // Empirical pairwise distances sit near the requested separation.
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double dist = 0;
      for (std::size_t j = 0; j < dim; ++j) dist += (mean[a][j] - mean[b][j]) * (mean[a][j] - mean[b][j]);
      EXPECT_NEAR(std::sqrt(dist), 4.0, 0.5);
    }
  }
  std::size_t hits = 0, total = 0;
  for (const auto& v : d.videos) {
    for (std::size_t t = 0; t < v.features.frames(); ++t) {
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t c = 0; c < k; ++c) {
        double dist = 0;
        for (std::size_t j = 0; j < dim; ++j) dist += std::pow(v.features.at(t, j) - mean[c][j], 2);
        if (dist < best_d) best_d = dist, best = c;
      }
      hits += best == (*v.ground_truth)[t];
      ++total;
    }
  }
  EXPECT_GE(double(hits) / double(total), 0.95);
}

TEST(Dataset, ManifestRoundTrip) {
  const auto dir = scratch("manifest");
  auto spec = small_spec();
  spec.num_videos = 3;
  const Dataset d = generate_synthetic(spec, 5);
  write_dataset(dir, d);
  const Dataset e = load_dataset(dir / "manifest.json");
  ASSERT_EQ(e.videos.size(), 3u);
  EXPECT_EQ(e.vocab, d.vocab);
  for (std::size_t v = 0; v < 3; ++v) {
    EXPECT_EQ(e.videos[v].id, d.videos[v].id);
    EXPECT_EQ(encode_features(e.videos[v].features), encode_features(d.videos[v].features));
    EXPECT_EQ(e.videos[v].transcript, d.videos[v].transcript);
    EXPECT_EQ(e.videos[v].ground_truth->labels, d.videos[v].ground_truth->labels);
  }
}

TEST(Dataset, RejectsTranscriptThatContradictsGroundTruth) {
  Dataset d;
  d.vocab = LabelVocab({"a", "b"});
  d.videos.push_back({"v", FeatureSequence(2, 1, {0, 0}), Transcript({1, 0}), LabelSequence({0, 1})});
  EXPECT_THROW(d.validate(), Error);
}
