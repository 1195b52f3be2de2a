#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "octbio/core/biomarker.hpp"
#include "octbio/core/dataset.hpp"
#include "octbio/core/digest.hpp"
#include "octbio/core/error.hpp"
#include "octbio/core/fixture.hpp"
#include "octbio/core/rng.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace octbio;
using octbio::testing::TempDir;

TEST(Biomarker, RegistryOrderAndLocality) {
  ASSERT_EQ(kBiomarkers.size(), 6u);
  const char* codes[] = {"IRHRF", "PAVF", "FAVF", "IRF", "DRT_DME", "VD"};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(kBiomarkers[i].code, codes[i]);
    EXPECT_EQ(index_of(kBiomarkers[i].id), i);
  }
  EXPECT_EQ(locality_of(Biomarker::IRHRF), Locality::LOCAL);
  EXPECT_EQ(locality_of(Biomarker::IRF), Locality::LOCAL);
  EXPECT_EQ(locality_of(Biomarker::PAVF), Locality::GLOBAL);
  EXPECT_EQ(locality_of(Biomarker::FAVF), Locality::GLOBAL);
  EXPECT_EQ(locality_of(Biomarker::VD), Locality::GLOBAL);
  EXPECT_EQ(locality_of(Biomarker::DRT_DME), Locality::INTERMEDIATE);
  EXPECT_EQ(parse_biomarker("DRT_DME"), Biomarker::DRT_DME);
  EXPECT_FALSE(parse_biomarker("drt").has_value());
  EXPECT_EQ(type_tag(Locality::INTERMEDIATE), "L/G");
}

TEST(Rng, DerivedStreamsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(7, "folds"), derive_seed(7, "folds"));
  EXPECT_NE(derive_seed(7, "folds"), derive_seed(7, "init"));
  EXPECT_NE(derive_seed(7, "init", {0}), derive_seed(7, "init", {1}));
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  Rng c(9);
  for (int i = 0; i < 1000; ++i) {
    const auto v = c.randint(3, 8);
    ASSERT_GE(v, 3);
    ASSERT_LT(v, 8);
  }
}

TEST(Digest, KnownVector) {
  EXPECT_EQ(sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

namespace {

ImageRecord record(const std::string& id, const std::string& patient) {
  ImageRecord r;
  r.image_id = id;
  r.patient_id = patient;
  r.image_path = "images/" + id + ".png";
  r.labels = {0, 1, 0, 1, 0, 1};
  return r;
}

void write_pngs(const std::filesystem::path& root, const std::vector<ImageRecord>& recs) {
  std::filesystem::create_directories(root / "images");
  for (const auto& r : recs) write_png(root / r.image_path, GrayImage(8, 8, 0.5));
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST(Manifest, ThreeRecordsTwoPatients) {
  TempDir dir;
  std::vector<ImageRecord> recs = {record("a", "p1"), record("b", "p1"), record("c", "p2")};
  write_pngs(dir.path(), recs);
  write_manifest(Dataset(recs, SplitTag::TRAIN), dir / "manifest.jsonl");
  const auto ds = load_manifest(dir / "manifest.jsonl");
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.patients().size(), 2u);
  EXPECT_EQ(ds.records()[2].image_id, "c");
  EXPECT_TRUE(validate_dataset(ds).empty());
}

TEST(Manifest, DuplicateIdNamesTheId) {
  TempDir dir;
  std::vector<ImageRecord> recs = {record("dup", "p1"), record("x", "p1"), record("dup", "p2")};
  write_pngs(dir.path(), recs);
  write_manifest(Dataset(recs, SplitTag::TRAIN), dir / "manifest.jsonl");
  try {
    load_manifest(dir / "manifest.jsonl");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("dup"), std::string::npos);
  }
}

TEST(Manifest, MalformedLineReportsLine) {
  TempDir dir;
  auto r = record("a", "p1");
  write_pngs(dir.path(), {r});
  write_text(dir / "m.jsonl", manifest_line(r) + "\n{not json\n");
  try {
    load_manifest(dir / "m.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Manifest, MissingImagesAreAllListed) {
  TempDir dir;
  std::vector<ImageRecord> recs = {record("a", "p1"), record("b", "p1"), record("c", "p2")};
  write_manifest(Dataset(recs, SplitTag::TRAIN), dir / "m.jsonl");
  try {
    load_manifest(dir / "m.jsonl");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.details().size(), 3u);
  }
}

TEST(Manifest, NullLabelsOnlyInUnlabeledDatasets) {
  TempDir dir;
  auto r = record("a", "p1");
  write_pngs(dir.path(), {r});
  write_text(dir / "m.jsonl",
             R"({"image_id":"a","patient_id":"p1","week":0,"image_path":"images/a.png","labels":[0,null,1,0,0,0],"clinical":null})"
             "\n");
  EXPECT_THROW(load_manifest(dir / "m.jsonl"), ValidationError);
  ManifestOptions opts;
  opts.unlabeled = true;
  const auto ds = load_manifest(dir / "m.jsonl", opts);
  EXPECT_EQ(ds.records()[0].labels[1], kUnknownLabel);
}

TEST(Validate, ShortLabelVectorAndDuplicates) {
  auto bad = record("a", "p1");
  bad.labels.pop_back();
  TempDir dir;
  write_pngs(dir.path(), {bad});
  auto v = validate_dataset(Dataset({bad}, SplitTag::TRAIN, dir.path()));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("label length"), std::string::npos);

  std::vector<ImageRecord> recs = {record("x", "p1"), record("y", "p1"), record("x", "p2")};
  write_pngs(dir.path(), recs);
  v = validate_dataset(Dataset(recs, SplitTag::TRAIN, dir.path()));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("0"), std::string::npos);
  EXPECT_NE(v[0].find("2"), std::string::npos);
}

TEST(Fixture, DefaultConfigCounts) {
  TempDir dir;
  FixtureConfig cfg;
  const auto ds = generate_fixture(cfg, dir.path());
  EXPECT_EQ(ds.size(), 96u);
  EXPECT_EQ(ds.patients().size(), 12u);
  EXPECT_TRUE(validate_dataset(load_manifest(dir / "manifest.jsonl")).empty());
}

TEST(Fixture, DeterministicBytes) {
  TempDir a, b;
  FixtureConfig cfg;
  cfg.n_patients = 3;
  cfg.images_per_patient = 4;
  const auto ds = generate_fixture(cfg, a.path());
  generate_fixture(cfg, b.path());
  EXPECT_EQ(sha256_file(a / "manifest.jsonl"), sha256_file(b / "manifest.jsonl"));
  for (const auto& r : ds.records()) {
    EXPECT_EQ(sha256_file(a.path() / r.image_path), sha256_file(b.path() / r.image_path));
  }
  cfg.seed = 8;
  TempDir c;
  generate_fixture(cfg, c.path());
  EXPECT_NE(sha256_file(a / "manifest.jsonl"), sha256_file(c / "manifest.jsonl"));
}

TEST(Fixture, RoundTripOverRandomManifests) {
  for (int i = 0; i < 50; ++i) {
    TempDir dir;
    FixtureConfig cfg;
    cfg.n_patients = 2 + i % 3;
    cfg.images_per_patient = 1 + i % 2;
    cfg.seed = 1000 + static_cast<std::uint64_t>(i);
    const auto generated = generate_fixture(cfg, dir.path());
    const auto loaded = load_manifest(dir / "manifest.jsonl");
    ASSERT_EQ(loaded, generated);
    write_manifest(loaded, dir / "again.jsonl");
    ASSERT_EQ(load_manifest(dir / "again.jsonl"), loaded);
    ASSERT_EQ(octbio::testing::read_file(dir / "again.jsonl"), octbio::testing::read_file(dir / "manifest.jsonl"));
  }
}

TEST(Fixture, DetectorRecoversLocalLabels) {
  // IRHRF is planted as small foci, IRF as larger discs.
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    std::array<std::int8_t, 6> labels{};
    for (auto& l : labels) l = rng.bernoulli(0.5) ? 1 : 0;
    const auto img = render_fixture_image(labels, 64, seed * 31 + 5);
    const auto census = octbio::testing::detect_blobs(img);
    ASSERT_EQ(census.small > 0, labels[index_of(Biomarker::IRHRF)] == 1) << "seed " << seed;
    ASSERT_EQ(census.large > 0, labels[index_of(Biomarker::IRF)] == 1) << "seed " << seed;
    if (labels[index_of(Biomarker::IRHRF)] == 1) {
      ASSERT_GE(census.peak_above_background, 0.3);
    }
  }
}

TEST(Fixture, LocalBlobsCoverUnderFivePercent) {
  std::array<std::int8_t, 6> labels{1, 0, 0, 1, 0, 0};
  std::array<std::int8_t, 6> none{0, 0, 0, 0, 0, 0};
  const auto with = render_fixture_image(labels, 64, 3);
  const auto without = render_fixture_image(none, 64, 3);
  int changed = 0;
  for (std::size_t i = 0; i < with.pixels.size(); ++i) changed += std::abs(with.pixels[i] - without.pixels[i]) > 0.2;
  EXPECT_GT(changed, 0);
  EXPECT_LT(changed, 0.05 * 64 * 64);
}

TEST(Fixture, UnwritableDirectoryIsIoError) {
  FixtureConfig cfg;
  EXPECT_THROW(generate_fixture(cfg, "/dev/null/fixture"), IoError);
}

TEST(Fixture, ConfigBounds) {
  FixtureConfig cfg;
  cfg.n_patients = 1;
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = {};
  cfg.label_prior[2] = 1.0;
  EXPECT_THROW(cfg.validate(), ContractError);
}
