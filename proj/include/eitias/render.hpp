#pragma once

#include <eitias/mesh.hpp>

#include <optional>
#include <string>
#include <vector>

namespace eitias {

struct RenderOptions {
  int size = 600;  // pixels, square canvas
  std::optional<double> vmin;
  std::optional<double> vmax;
  // Symmetric blue-white-red scale around zero; used for difference images.
  bool diverging = false;
  std::string title;
  bool draw_electrodes = true;
};

// One polygon per triangle filled by its value, with a colour-scale legend.
std::string render_svg(const Mesh& mesh, const Vector& values, const RenderOptions& options = {},
                       const std::vector<Arc>& electrodes = {});

// Maps t in [0, 1] to an sRGB hex colour.
std::string sequential_color(double t);
std::string diverging_color(double t);

}  // namespace eitias
