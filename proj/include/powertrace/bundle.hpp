#pragma once

#include <string>

#include "powertrace/classifier.hpp"
#include "powertrace/gmm.hpp"
#include "powertrace/types.hpp"
#include "powertrace/workload.hpp"

namespace powertrace {

// Everything needed to generate traces for one serving configuration:
// latency surrogate, state catalog, and trained classifier (which carries
// the feature normalization stats). Persisted as a single JSON document.
struct ModelBundle {
    static constexpr int kFormatVersion = 1;

    ServingConfig config;
    LatencySurrogate surrogate;
    StateCatalog catalog;
    ClassifierModel classifier;
    int format_version = kFormatVersion;

    void validate() const;
};

// JSON round-trip is bit-exact for every numeric field (shortest
// round-trip decimal encoding).
void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

// Standalone artifacts produced by the fit/train subcommands and stitched
// together by build-bundle. Same field layout as the bundle sections.
void save_surrogate(const LatencySurrogate& surrogate, const std::string& path);
LatencySurrogate load_surrogate(const std::string& path);
void save_catalog(const StateCatalog& catalog, const std::string& path);
StateCatalog load_catalog(const std::string& path);
void save_classifier(const ClassifierModel& classifier, const std::string& path);
ClassifierModel load_classifier(const std::string& path);

} // namespace powertrace
