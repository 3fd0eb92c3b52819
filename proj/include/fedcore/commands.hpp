#pragma once

#include <filesystem>
#include <string>

#include "fedcore/config.hpp"

namespace fedcore {

// Each command writes into config.output_dir and returns a one-line summary.

/// client_{i}.fca for every client and heldout.fca.
std::string cmd_synth(const RunConfig& config);
/// assignment.csv (sample_index, client_id).
std::string cmd_partition(const RunConfig& config);
/// One selection pass over all clients: coreset_{i}.csv, selection.json,
/// and trace.jsonl with the upload and notice messages.
std::string cmd_select(const RunConfig& config);
/// run.jsonl, summary.json, metrics.csv (and trace.jsonl when tracing).
std::string cmd_run(const RunConfig& config);
/// metrics.csv from a run history, plus embeddings_{i}.csv,
/// embeddings_{i}_last_layer.csv and layer_metrics.csv for report.clients.
std::string cmd_report(const RunConfig& config);

}  // namespace fedcore
