#include <ostream>

#include "common.hpp"
#include "uai/checkpoint.hpp"
#include "uai/error.hpp"

namespace uai::cli {

namespace {

struct ExtractOptions {
  std::string checkpoint;
  std::string data;
  std::string h1_out;
  std::string h2_out;
  CommonOptions common;
};

void Execute(const ExtractOptions& o, const Io& io) {
  RequireInputFile(o.checkpoint, "checkpoint");
  RequireDataset(o.data, "input data");
  const data::DatasetPaths h1 = Prefix(o.h1_out);
  const data::DatasetPaths h2 = Prefix(o.h2_out);
  for (const auto& p : {h1.embeddings, h1.labels, h2.embeddings, h2.labels}) {
    RequireOutputPath(p, "output");
  }
  RequireDistinct({h1.embeddings, h1.labels, h2.embeddings, h2.labels},
                  {o.checkpoint, Prefix(o.data).embeddings, Prefix(o.data).labels});

  const UaiModel model = LoadCheckpointFile(o.checkpoint);
  const data::EmbeddingDataset ds = data::LoadDataset(Prefix(o.data));
  if (ds.dim() != model.config.input_dim) {
    throw InputError("data dimension " + std::to_string(ds.dim()) +
                     " differs from the model input " +
                     std::to_string(model.config.input_dim));
  }
  const EmbeddingPairs h = Encode(model, ds.AllRows());

  StagedOutputs staged;
  SaveStaged(staged, data::WithEmbeddings(ds, h.h1), h1);
  SaveStaged(staged, data::WithEmbeddings(ds, h.h2), h2);
  staged.Commit();

  MetricsLog log = OpenLog(o.common, "extract-" + std::to_string(model.config.seed));
  log.Record("extract", "items", static_cast<double>(ds.size()));
  io.out << "wrote " << h1.embeddings.string() << " (" << ds.size() << " x " << h.h1.cols()
         << ") and " << h2.embeddings.string() << " (" << ds.size() << " x " << h.h2.cols()
         << ")\n";
}

}  // namespace

Action SetupExtract(CLI::App& app, const Io& io) {
  auto o = std::make_shared<ExtractOptions>();
  app.add_option("--checkpoint", o->checkpoint, "Trained checkpoint")->required();
  app.add_option("--data", o->data, "Input dataset prefix")->required();
  app.add_option("--h1-out", o->h1_out, "Output prefix for the speaker embeddings")
      ->required();
  app.add_option("--h2-out", o->h2_out, "Output prefix for the nuisance embeddings")
      ->required();
  AddCommonOptions(app, o->common);
  return [o, &io] { Execute(*o, io); };
}

}  // namespace uai::cli
