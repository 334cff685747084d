// Writes the deterministic CSV fixtures under data/. Shapes follow common
// UCI tables; values come from a hidden random tree plus label noise.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "onepath/synth.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  const fs::path out = argc > 1 ? argv[1] : "data";
  fs::create_directories(out);

  struct Spec {
    const char* file;
    std::size_t rows, n;
    std::vector<std::string> classes;
  };
  const Spec specs[] = {
      {"heart-shape.csv", 303, 13, {"absent", "present"}},
      {"breast-shape.csv", 286, 9, {"no-recurrence", "recurrence"}},
      {"wine-shape.csv", 178, 13, {"cultivar-1", "cultivar-2", "cultivar-3"}},
      {"iris-shape.csv", 150, 4, {"setosa", "versicolor", "virginica"}},
  };
  for (const auto& s : specs) {
    onepath::Rng rng = onepath::Rng::from_seed(std::string("dataset/") + s.file);
    const auto ds = onepath::synthetic_dataset(s.rows, s.n, s.classes, rng);
    std::ofstream f(out / s.file);
    onepath::write_csv(f, ds);
    std::cout << (out / s.file).string() << ": " << s.rows << " rows, " << s.n << " features\n";
  }
}
