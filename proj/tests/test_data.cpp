#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "evoclass/data.hpp"
#include "evoclass/errors.hpp"
#include "evoclass/image_io.hpp"

using namespace evoclass;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("evoclass_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CorpusSpec small_spec(uint64_t seed) {
  CorpusSpec spec;
  spec.n_train_normal = spec.n_train_met = 6;
  spec.n_test_normal = spec.n_test_met = 6;
  spec.n_institutions = 5;
  spec.image_size = 48;
  spec.master_seed = seed;
  return spec;
}

int count_outside(const std::vector<LabeledSample>& samples, Split split) {
  int n = 0;
  for (const auto& s : samples)
    if (s.split == split && s.institution != "home") ++n;
  return n;
}

}  // namespace

TEST_CASE("rounded counts") {
  CHECK(rounded_count(0.37, 60) == 22);
  CHECK(rounded_count(0.83, 60) == 50);
  CHECK(rounded_count(0.5, 3) == 2);  // ties up
  CHECK(rounded_count(0.0, 60) == 0);
  CHECK(rounded_count(1.0, 60) == 60);
}

TEST_CASE("default corpus structure matches the study layout") {
  CorpusSpec spec;
  spec.master_seed = 11;
  Corpus corpus = generate_corpus(spec, 1);
  CHECK(corpus.samples.size() == 120);

  int cell[2][2] = {{0, 0}, {0, 0}};
  for (const auto& s : corpus.samples)
    ++cell[s.split == Split::test][s.label == Label::metastasis];
  CHECK(cell[0][0] == 30);
  CHECK(cell[0][1] == 30);
  CHECK(cell[1][0] == 30);
  CHECK(cell[1][1] == 30);

  CHECK(count_outside(corpus.samples, Split::train) == 22);
  CHECK(count_outside(corpus.samples, Split::test) == 50);

  // the asymmetry: training normals are home scans, outside training
  // images are metastases; testing normals are outside scans
  for (const auto& s : corpus.samples) {
    if (s.split == Split::train && s.label == Label::normal)
      CHECK(s.institution == "home");
    if (s.split == Split::test && s.label == Label::normal)
      CHECK(s.institution != "home");
  }
}

TEST_CASE("profiles stay inside their documented ranges") {
  Corpus corpus = generate_corpus(small_spec(3), 1);
  REQUIRE(corpus.profiles.size() == 5);
  for (const auto& p : corpus.profiles) {
    CHECK(p.gamma >= 0.6f);
    CHECK(p.gamma <= 1.6f);
    CHECK(p.noise_sigma >= 0.0f);
    CHECK(p.noise_sigma <= 0.06f);
    CHECK(p.intensity_scale >= 0.7f);
    CHECK(p.intensity_scale <= 1.3f);
    CHECK(p.bias_field_amp >= 0.0f);
    CHECK(p.bias_field_amp <= 0.3f);
    CHECK(p.vessel_density >= 0.0f);
    CHECK(p.vessel_density <= 1.0f);
    CHECK(p.blur_sigma >= 0.0f);
    CHECK(p.blur_sigma <= 1.5f);
  }
}

TEST_CASE("same master seed reproduces the corpus byte for byte") {
  Corpus a = generate_corpus(small_spec(7), 1);
  Corpus b = generate_corpus(small_spec(7), 3);  // worker count must not matter
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].id == b.samples[i].id);
    CHECK(a.samples[i].institution == b.samples[i].institution);
    REQUIRE(a.samples[i].image.data.size() == b.samples[i].image.data.size());
    for (size_t j = 0; j < a.samples[i].image.data.size(); ++j)
      REQUIRE(a.samples[i].image.data[j] == b.samples[i].image.data[j]);
  }
  Corpus c = generate_corpus(small_spec(8), 1);
  bool differs = false;
  for (size_t j = 0; j < c.samples[0].image.data.size(); ++j)
    if (c.samples[0].image.data[j] != a.samples[0].image.data[j]) differs = true;
  CHECK(differs);
}

TEST_CASE("pixels stay in range and lesions sit strictly inside the head") {
  Corpus corpus = generate_corpus(small_spec(13), 1);
  for (size_t i = 0; i < corpus.samples.size(); ++i) {
    const LabeledSample& s = corpus.samples[i];
    for (float v : s.image.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
    if (s.label == Label::metastasis) {
      REQUIRE(!s.lesion_boxes.empty());
      CHECK(s.lesion_boxes.size() <= 3);
      const auto& e = corpus.ellipses[i];
      for (const LesionBox& b : s.lesion_boxes) {
        CHECK(b.radius >= 3.0f);
        CHECK(b.radius <= 10.0f);
        const double dx = b.x - e[0];
        const double dy = b.y - e[1];
        const double mx = e[2] - b.radius - 2.0;
        const double my = e[3] - b.radius - 2.0;
        CHECK(dx * dx / (mx * mx) + dy * dy / (my * my) <= 1.0 + 1e-5);
      }
    } else {
      CHECK(s.lesion_boxes.empty());
    }
  }
}

TEST_CASE("infeasible specs are rejected") {
  CorpusSpec spec = small_spec(1);
  spec.n_institutions = 100;
  CHECK_THROWS_AS(generate_corpus(spec, 1), ArgumentError);
  spec = small_spec(1);
  spec.n_train_normal = 5;  // unbalanced
  CHECK_THROWS_AS(generate_corpus(spec, 1), ArgumentError);
  spec = small_spec(1);
  spec.outside_fraction_test = 1.5;
  CHECK_THROWS_AS(generate_corpus(spec, 1), ArgumentError);
}

TEST_CASE("write then load reproduces identical tensors") {
  const fs::path dir = temp_dir("roundtrip");
  Corpus corpus = generate_corpus(small_spec(21), 1);
  write_corpus(corpus, dir);
  auto loaded = load_manifest(dir / "manifest.csv", corpus.image_size);
  REQUIRE(loaded.size() == corpus.samples.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].id == corpus.samples[i].id);
    CHECK(loaded[i].label == corpus.samples[i].label);
    CHECK(loaded[i].institution == corpus.samples[i].institution);
    CHECK(loaded[i].split == corpus.samples[i].split);
    REQUIRE(loaded[i].image.data.size() == corpus.samples[i].image.data.size());
    for (size_t j = 0; j < loaded[i].image.data.size(); ++j)
      REQUIRE(loaded[i].image.data[j] == corpus.samples[i].image.data[j]);
  }

  auto boxes = load_truth_boxes(dir / "truth.json");
  for (const auto& s : corpus.samples) {
    REQUIRE(boxes.count(s.id) == 1);
    CHECK(boxes[s.id].size() == s.lesion_boxes.size());
  }
}

TEST_CASE("manifest ingestion errors name the offending row") {
  const fs::path dir = temp_dir("badmanifest");
  {
    std::ofstream os(dir / "empty.csv");
    os << "id,path,label,institution,split\n";
  }
  CHECK_THROWS_AS(load_manifest(dir / "empty.csv", 32), ArgumentError);

  {
    std::ofstream os(dir / "badlabel.csv");
    os << "id,path,label,institution,split\n";
    os << "x1,missing.pgm,tumor,home,train\n";
  }
  try {
    load_manifest(dir / "badlabel.csv", 32);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }

  {
    std::ofstream os(dir / "missing.csv");
    os << "id,path,label,institution,split\n";
    os << "x1,missing.pgm,normal,home,train\n";
  }
  CHECK_THROWS_AS(load_manifest(dir / "missing.csv", 32), DataError);

  {
    std::ofstream os(dir / "badheader.csv");
    os << "id,file,label,institution,split\n";
  }
  CHECK_THROWS_AS(load_manifest(dir / "badheader.csv", 32), DataError);
}

TEST_CASE("pgm endpoints and resize on ingestion") {
  const fs::path dir = temp_dir("pgm");
  GrayImage img;
  img.width = 4;
  img.height = 4;
  img.pixels.assign(16, 0.0f);
  img.pixels[0] = 1.0f;
  img.pixels[5] = 1.0f;
  write_pgm(dir / "img.pgm", img);
  GrayImage back = read_pgm(dir / "img.pgm");
  CHECK(back.pixels[0] == 1.0f);
  CHECK(back.pixels[1] == 0.0f);
  CHECK(back.pixels[5] == 1.0f);

  {
    std::ofstream os(dir / "img2.pgm", std::ios::binary);
    os << "P5\n# comment\n2 2\n255\n";
    const unsigned char px[4] = {0, 255, 128, 64};
    os.write(reinterpret_cast<const char*>(px), 4);
  }
  GrayImage two = read_pgm(dir / "img2.pgm");
  CHECK(two.pixels[0] == 0.0f);
  CHECK(two.pixels[1] == 1.0f);
  CHECK(two.pixels[2] == doctest::Approx(128.0 / 255.0));

  GrayImage up = bilinear_resize(two, 4, 4);
  CHECK(up.width == 4);
  for (float v : up.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("png ingestion converts to gray in [0,1]") {
  // 4x4 8-bit gray PNG with pixels (0,0)=255, (1,1)=128, (3,3)=64
  static const unsigned char png_bytes[] = {
      137, 80,  78,  71,  13,  10,  26,  10,  0,   0,   0,   13,  73,  72,
      68,  82,  0,   0,   0,   4,   0,   0,   0,   4,   8,   0,   0,   0,
      0,   140, 154, 193, 162, 0,   0,   0,   19,  73,  68,  65,  84,  120,
      156, 99,  248, 207, 192, 192, 192, 192, 208, 192, 128, 0,   14,  0,
      25,  193, 1,   192, 248, 62,  215, 224, 0,   0,   0,   0,   73,  69,
      78,  68,  174, 66,  96,  130};
  const fs::path dir = temp_dir("png");
  {
    std::ofstream os(dir / "tiny.png", std::ios::binary);
    os.write(reinterpret_cast<const char*>(png_bytes), sizeof(png_bytes));
  }
  GrayImage img = read_image(dir / "tiny.png");
  CHECK(img.width == 4);
  CHECK(img.height == 4);
  CHECK(img.pixels[0] == 1.0f);
  CHECK(img.pixels[5] == doctest::Approx(128.0 / 255.0));
  CHECK(img.pixels[15] == doctest::Approx(64.0 / 255.0));

  CHECK_THROWS_AS(read_image(dir / "tiny.bmp"), DataError);
}

TEST_CASE("micro dataset is balanced, deterministic and mean-separable") {
  auto [train, test] = micro_dataset(5);
  auto [train2, test2] = micro_dataset(5);
  CHECK(train.size() == 20);
  CHECK(test.size() == 20);
  for (size_t i = 0; i < train.size(); ++i)
    for (size_t j = 0; j < train[i].image.data.size(); ++j)
      REQUIRE(train[i].image.data[j] == train2[i].image.data[j]);
  (void)test2;

  auto check_split = [](const std::vector<LabeledSample>& ss) {
    int met = 0;
    for (const auto& s : ss) {
      double mean = 0.0;
      for (float v : s.image.data) mean += v;
      mean /= static_cast<double>(s.image.numel());
      // a threshold-on-mean classifier is perfect
      CHECK((mean > 0.5) == (s.label == Label::metastasis));
      met += s.label == Label::metastasis;
    }
    CHECK(met == static_cast<int>(ss.size()) / 2);
  };
  check_split(train);
  check_split(test);
}
