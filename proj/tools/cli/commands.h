#pragma once

#include "cli/run_config.h"

namespace ierf::cli {

// Each command writes its artifacts and run_config.json into c.output.
// Failures surface as ierf::Error.

// <stem>.<scale>.<variant>.heat.pgm (+ .heat.json) per image, and
// metrics.json when c.metrics is set.
void cmd_attribute(const RunConfig& c);

// concepts_<layer>.{json,bin}, coeffs_<layer>.bin and reconstruction.json
// per extractor (a sub-directory per extractor when several are listed).
void cmd_concepts(const RunConfig& c);

// graph.json + graph.dot per class (class_<c>/ when every class is built),
// plus validation.json with c.validate.
void cmd_graph(const RunConfig& c);

// metrics.json: the five saliency metrics for every scale and variant.
void cmd_evaluate(const RunConfig& c);

// curves.json: ranked vs random insertion/deletion curves for one target
// concept of the layer pair given by c.layers.
void cmd_insertion_deletion(const RunConfig& c);

}  // namespace ierf::cli
