#pragma once

// Iteration history sink. history.csv holds only quantities that are a pure
// function of config and seed, so repeated runs are byte-identical; wall time
// goes to timing.csv. Both are flushed after every row.
//
// history.csv columns:
//   iteration, objective, output_eroded, output_blueprint, strain_energy,
//   se_star, se_ratio, volume_ratio1..m (used / allowed), beta, max_change

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pneumo/errors.hpp"
#include "pneumo/optimizer.hpp"

namespace pneumo {

class HistoryWriter {
 public:
  HistoryWriter(const std::filesystem::path& dir, int num_materials) : num_materials_(num_materials) {
    history_ = open(dir / "history.csv");
    timing_ = open(dir / "timing.csv");
    std::fputs("iteration,objective,output_eroded,output_blueprint,strain_energy,se_star,se_ratio", history_.get());
    for (int k = 1; k <= num_materials_; ++k) std::fprintf(history_.get(), ",volume_ratio%d", k);
    std::fputs(",beta,max_change\n", history_.get());
    std::fputs("iteration,wall_time\n", timing_.get());
    flush();
  }

  void append(const IterationRecord& r) {
    if (static_cast<int>(r.volume.size()) != num_materials_) throw ContractViolation("history: volume column count mismatch");
    std::FILE* h = history_.get();
    std::fprintf(h, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.iteration, r.objective, r.output_eroded,
                 r.output_blueprint, r.strain_energy, r.se_star, r.se_ratio);
    for (double v : r.volume) std::fprintf(h, ",%.17g", v);
    std::fprintf(h, ",%.17g,%.17g\n", r.beta, r.max_change);
    std::fprintf(timing_.get(), "%d,%.6f\n", r.iteration, r.wall_time);
    flush();
  }

 private:
  struct Closer {
    void operator()(std::FILE* f) const { std::fclose(f); }
  };
  using File = std::unique_ptr<std::FILE, Closer>;

  static File open(const std::filesystem::path& path) {
    File f(std::fopen(path.string().c_str(), "w"));
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    return f;
  }

  void flush() {
    if (std::fflush(history_.get()) != 0 || std::fflush(timing_.get()) != 0) throw IoError("history: flush failed");
  }

  int num_materials_;
  File history_;
  File timing_;
};

}  // namespace pneumo
