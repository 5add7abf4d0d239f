#pragma once

#include <filesystem>
#include <iosfwd>

#include "sentinel/featurize.hpp"

namespace sentinel {

// Header `M N density`, then `label<TAB>source<TAB>family<TAB>compile_year<TAB>j1 j2 ...`.
// Missing compile years are written as NA.
void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);

// Sample ids live in a sidecar (`<dataset>.ids`, one per row) so the row
// format stays fixed.
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

// `index<TAB>q<TAB>action:target[|action:target...]`.
void write_vocabulary(std::ostream& out, const FeatureVocabulary& vocab);
FeatureVocabulary read_vocabulary(std::istream& in);

}  // namespace sentinel
