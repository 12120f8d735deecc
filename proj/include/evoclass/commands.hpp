#pragma once

#include <string>
#include <vector>

#include "evoclass/config.hpp"

namespace evoclass {

// CLI entry points. Each returns 0 on success and throws on failure;
// exit-code mapping happens in the CLI driver.

int cmd_gen_data(const RunConfig& cfg);

// method: dne | sgd | adam. Writes model.bin, history.csv, metrics.json,
// predictions.csv under cfg.output_dir. A .partial marker exists while
// the run is incomplete.
int cmd_train(const RunConfig& cfg, const std::string& method);

int cmd_eval(const std::string& model_path, const std::string& manifest_path,
             const std::string& out_dir, const std::string& split_filter,
             int workers);

// Joins two predictions CSVs by sample id. The optional manifest supplies
// institution tags for the outside-only section.
int cmd_compare(const std::string& preds_a, const std::string& preds_b,
                const std::string& out_path, const std::string& manifest_path);

int cmd_saliency(const std::string& model_path, const std::string& manifest_path,
                 const std::vector<std::string>& sample_ids,
                 const std::string& out_dir, int patch, int stride,
                 const std::string& fill_mode, int workers);

// Aggregates history CSVs (label=path pairs) into one long-format
// summary: source,step,train_acc,test_acc.
int cmd_report(const std::vector<std::string>& curves, const std::string& out_path);

}  // namespace evoclass
