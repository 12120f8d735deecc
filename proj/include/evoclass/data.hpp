#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "evoclass/tensor.hpp"

namespace evoclass {

enum class Label { normal = 0, metastasis = 1 };
enum class Split { train, test };

std::string label_name(Label l);
Label parse_label(const std::string& s);
std::string split_name(Split s);
Split parse_split(const std::string& s);

struct LesionBox {
  float x = 0;
  float y = 0;
  float radius = 0;
};

struct LabeledSample {
  std::string id;
  Tensor image;  // [1, S, S] in [0,1]
  Label label = Label::normal;
  std::string institution;
  Split split = Split::train;
  std::vector<LesionBox> lesion_boxes;  // synthetic metastasis samples only
};

// One site's acquisition style. All fields stay inside these ranges:
// gamma [0.6,1.6], noise_sigma [0,0.06], intensity_scale [0.7,1.3],
// bias_field_amp [0,0.3], vessel_density [0,1], blur_sigma [0,1.5] px.
struct InstitutionProfile {
  float gamma = 1.0f;
  float noise_sigma = 0.0f;
  float intensity_scale = 1.0f;
  float bias_field_amp = 0.0f;
  float vessel_density = 0.0f;
  float blur_sigma = 0.0f;
};

struct CorpusSpec {
  int n_train_normal = 30;
  int n_train_met = 30;
  int n_test_normal = 30;
  int n_test_met = 30;
  int n_institutions = 16;
  double outside_fraction_train = 0.37;
  double outside_fraction_test = 0.83;
  int image_size = 64;
  uint64_t master_seed = 0;

  void validate() const;
};

struct Corpus {
  std::vector<LabeledSample> samples;
  std::vector<std::string> institution_names;  // [0] is "home"
  std::vector<InstitutionProfile> profiles;
  // head ellipse per sample, (cx, cy, ax, ay); kept for audit checks
  std::vector<std::array<float, 4>> ellipses;
  int image_size = 0;
};

// round-to-nearest, ties up
int rounded_count(double fraction, int total);

// Deterministic in master_seed for any worker count; every image has its
// own counter-derived stream. Outside institutions are assigned
// metastasis-first in the training split and normal-first in the testing
// split, so the style/class correlation flips between splits the way a
// home-heavy training set against a referral-heavy testing set does.
Corpus generate_corpus(const CorpusSpec& spec, int workers = 1);

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

std::vector<LabeledSample> load_manifest(const std::filesystem::path& manifest_csv,
                                         int target_size);

// truth.json sidecar: lesion boxes per sample id plus institution profiles.
std::map<std::string, std::vector<LesionBox>> load_truth_boxes(
    const std::filesystem::path& truth_json);

// 16x16 two-blob sanity benchmark: class 0 mean 0.25, class 1 mean 0.75,
// noise sigma 0.05; separable by mean intensity. 20 train + 20 test.
std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> micro_dataset(
    uint64_t seed);

double mean_intensity(const std::vector<LabeledSample>& samples);

}  // namespace evoclass
