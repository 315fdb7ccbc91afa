#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "triagekit/cohort.hpp"

namespace triagekit {

struct SchemaMismatch : DataError {
    explicit SchemaMismatch(const std::string& reason);
};

/// A numeric vector plus the identity of the encoder that produced it, so
/// vectors from different encoders cannot be mixed silently.
struct FeatureVector {
    std::string schema_id;
    std::vector<double> values;
};

struct ContinuousFeature {
    std::string name;
    double mean = 0;
    double sd = 1; // always > 0; zero-variance features are dropped at fit
};

/// Encoding recipe fitted on training data only.
struct EncoderSchema {
    std::vector<ContinuousFeature> continuous;
    std::vector<std::string> dropped_continuous; // zero variance in train
    std::vector<std::string> sex_levels;         // tokens seen in train
    std::vector<std::string> window_levels;
    std::vector<std::string> recourse_levels;
    std::size_t d_text = 256;
    std::uint64_t hash_seed = 0;

    std::string id() const;             // content hash
    std::size_t structured_dim() const; // continuous + one-hots (+OTHER) + 2 flags
};

EncoderSchema fit_schema(const Cohort& train, std::size_t d_text, std::uint64_t seed);

void schema_to_json(const EncoderSchema& schema, std::ostream& out);
EncoderSchema schema_from_json(std::istream& in);

FeatureVector encode_structured(const PatientRecord& record, const EncoderSchema& schema);

/// Signed hashed bag of tokens: lowercase, accent-fold, split on
/// non-alphanumerics, scale by 1/max(1, token count). L1 norm ≤ 1.
FeatureVector featurize_text(const std::string& text, std::size_t d_text, std::uint64_t seed);

/// Identifier shared by every text vector with the same (d_text, seed).
std::string text_schema_id(std::size_t d_text, std::uint64_t seed);

/// Concatenation. Empty vectors are identity elements; two non-empty parts
/// claiming the same schema cannot be combined.
FeatureVector combine(const std::vector<FeatureVector>& parts);

// ---------------------------------------------------------------------------
// Labeled design matrix
// ---------------------------------------------------------------------------

enum class InputVariant { Structured, Text, Both };

std::string input_variant_token(InputVariant v);
InputVariant input_variant_from_token(const std::string& token);

/// Contiguous column block sharing one semantic source feature.
struct FeatureGroup {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

struct Dataset {
    std::string schema_id;
    std::size_t dim = 0;
    std::vector<double> values; // row-major, rows() x dim
    std::vector<int> labels;    // 0-based ranks
    std::vector<std::string> case_ids;
    std::vector<FeatureGroup> groups;

    std::size_t rows() const { return case_ids.size(); }
    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * dim, dim};
    }
};

/// Encode every record carrying the selected label; records without it are
/// skipped. Missing history text encodes as the empty text.
Dataset build_dataset(const Cohort& cohort, const EncoderSchema& schema,
                      LabelSelector selector, InputVariant variant);

} // namespace triagekit
