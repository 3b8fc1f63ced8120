#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vqacoin/config.hpp"
#include "vqacoin/tensor.hpp"
#include "vqacoin/textprep.hpp"

namespace vqacoin::data {

inline constexpr std::array<const char*, 6> kShapes = {"circle",  "square",  "triangle",
                                                       "star",    "diamond", "hexagon"};
inline constexpr std::array<const char*, 8> kColors = {"red",    "blue",   "green", "yellow",
                                                       "purple", "orange", "black", "white"};
inline constexpr size_t kGridSide = 4;
/// Feature layout: shape one-hot (6) | color one-hot (8) | grid row one-hot
/// (4) | grid column one-hot (4); anything past that is noise.
inline constexpr size_t kFeaturePrefix = 6 + 8 + kGridSide + kGridSide;

struct SceneObject {
  size_t shape;  // index into kShapes
  size_t color;  // index into kColors
  size_t cell;   // 0..15 on the 4x4 grid, unique per object
};

struct SceneSpec {
  uint64_t seed = 0;
  std::vector<SceneObject> objects;
};

/// One (image, question, answers) record, the unit of training and eval.
struct VqaExample {
  long long question_id = 0;
  long long image_id = 0;
  std::string question;
  Tensor image_feats;                  // [f_i x d_image]
  std::vector<std::string> si_words;   // <= 40 content tokens
  std::vector<std::string> answers;    // exactly 10, or empty on a test split
  std::string canonical_answer;        // empty on a test split
  std::string category;                // "yes/no", "number", or "other"
};

/// Deterministic scene draw: object count uniform in [count_min, count_max],
/// attributes uniform, cells distinct.
SceneSpec gen_scene(uint64_t seed, size_t count_min, size_t count_max);

/// One row per object: the one-hot prefix above, then Gaussian(0, noise_sigma)
/// in the remaining coordinates.
Tensor scene_to_features(const SceneSpec& scene, size_t d_image, double noise_sigma,
                         uint64_t seed);

struct GenResult {
  std::vector<VqaExample> examples;   // up to 3 per scene (one per template)
  std::vector<std::string> captions;  // raw caption stream fed to textprep
};

/// Questions from three templates: existence ("is there a red circle") ->
/// yes/no, counting ("how many circles") -> number, attribute ("what color
/// is the circle") -> other, the last only when the chosen shape is unique
/// in the scene. Ground truth is computed from the scene; each of the 10
/// annotators independently flips to a different plausible answer with
/// probability annotator_noise. Captions are "<filler> <color> <shape>"
/// sentences with injected near-duplicates, run through the full caption
/// pipeline to produce si_words.
GenResult gen_examples(const SceneSpec& scene, long long image_id, double annotator_noise,
                       double noise_sigma, size_t d_image, const textprep::Wordlists& lists,
                       uint64_t seed);

struct Dataset {
  std::vector<VqaExample> examples;
  size_t missing_si = 0;        // images that had no semantic-info entry
  bool has_annotations = false;
};

struct Corpus {
  Dataset train;
  Dataset val;
  std::vector<std::pair<long long, std::vector<std::string>>> train_captions;
  std::vector<std::pair<long long, std::vector<std::string>>> val_captions;
};

/// Full corpus draw; examples and file bytes are functions of (cfg, d_image,
/// seed) only.
Corpus generate_corpus(const DataGenConfig& cfg, size_t d_image, uint64_t seed);

/// Lowercase, drop punctuation, drop the articles a/an/the. Used both when
/// building the answer set and when matching predictions, so the two can
/// never disagree.
std::string normalize_answer(const std::string& answer);

/// Writes questions.json, annotations.json (skipped when the split carries
/// no answers), features.json (or features.bin with binary_features), and
/// si.json into dir, plus captions.json when captions are given.
void save_split(const std::string& dir, const Dataset& ds,
                const std::vector<std::pair<long long, std::vector<std::string>>>* captions,
                bool binary_features = false);

/// Joins the four files into examples. A missing annotations file yields
/// empty answers (test-split mode); a missing SI entry for an image yields
/// empty si_words and bumps missing_si; a question whose image has no
/// features row is an error listing the dangling ids.
Dataset load_split_files(const std::string& questions_path, const std::string& annotations_path,
                         const std::string& features_path, const std::string& si_path);

/// load_split_files over the standard layout in dir, preferring
/// features.json and falling back to features.bin.
Dataset load_split(const std::string& dir);

/// Deterministic shuffled prefix of ceil(fraction*n) examples; prefixes are
/// nested across fractions for a fixed seed.
std::vector<VqaExample> scale_split(const std::vector<VqaExample>& examples, double fraction,
                                    uint64_t seed);

/// FNV-1a over the file bytes, for provenance manifests.
uint64_t fnv1a_file(const std::string& path);

}  // namespace vqacoin::data
