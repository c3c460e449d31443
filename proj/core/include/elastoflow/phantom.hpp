#pragma once

#include <optional>
#include <string>
#include <vector>

#include "elastoflow/rf_frame.hpp"
#include "elastoflow/warp.hpp"

namespace elastoflow::phantom {

/// Pixel grid plus acquisition parameters. Pixel (i, j) sits at physical
/// (i * axial_step_mm(), j * lateral_pitch_mm); depth uses the pulse-echo
/// convention z = c t / 2.
struct ImagingGrid {
  int64_t axial_samples = 1024;
  int64_t lateral_lines = 256;
  double sampling_freq_hz = 40.0e6;
  double center_freq_hz = 10.0e6;
  double speed_of_sound_m_s = 1540.0;
  double lateral_pitch_mm = 0.15;

  double axial_step_mm() const { return speed_of_sound_m_s * 1000.0 / (2.0 * sampling_freq_hz); }
  double depth_mm() const { return static_cast<double>(axial_samples) * axial_step_mm(); }
  double width_mm() const { return static_cast<double>(lateral_lines) * lateral_pitch_mm; }
};

/// Separable point-spread function: Gaussian-windowed cosine axially (carrier
/// at the grid's center frequency), Gaussian laterally. Envelope sigma comes
/// from the fractional -6 dB bandwidth; the pulse spans about two carrier
/// cycles at the 0.6 default.
struct PsfParams {
  double frac_bandwidth = 0.6;
  double lateral_sigma_pitches = 2.0;
  double support_sigmas = 4.0;  // truncation radius of the rendered kernel

  double axial_sigma_mm(const ImagingGrid& grid) const;
  double lateral_sigma_mm(const ImagingGrid& grid) const;
};

/// -6 dB resolution cell area, used to express scatterer density in
/// "per resolution cell" units for the speckle-regime check.
double resolution_cell_mm2(const PsfParams& psf, const ImagingGrid& grid);
double default_resolution_cell_mm2();

/// Scatterer density below this many per resolution cell leaves the fully
/// developed speckle regime; generate_scatterers records a warning.
inline constexpr double kMinSpeckleDensityPerCell = 5.0;

struct PhantomExtent {
  double axial_mm = 0.0;
  double lateral_mm = 0.0;
  double area_mm2() const { return axial_mm * lateral_mm; }

  static PhantomExtent of(const ImagingGrid& grid) { return {grid.depth_mm(), grid.width_mm()}; }
};

struct ScattererField {
  std::vector<double> axial_mm;
  std::vector<double> lateral_mm;
  std::vector<double> amplitudes;
  PhantomExtent extent;
  double density_per_mm2 = 0.0;
  std::string warning;  // empty when the speckle-regime check passed

  size_t count() const { return amplitudes.size(); }
};

/// count = round(density * area); uniform positions, i.i.d. standard normal
/// amplitudes; deterministic for a fixed seed.
ScattererField generate_scatterers(const PhantomExtent& extent, double density_per_mm2,
                                   uint64_t seed,
                                   double cell_mm2 = default_resolution_cell_mm2());

/// Sum of per-scatterer separable PSFs evaluated on the grid.
/// Throws when the truncated PSF support exceeds the grid extent.
RfFrame render_rf(const ScattererField& scatterers, const PsfParams& psf, const ImagingGrid& grid,
                  const std::string& frame_id = "phantom");

enum class DeformationKind { uniform_strain, inclusion, custom_grid };

struct InclusionSpec {
  double center_axial_mm = 0.0;
  double center_lateral_mm = 0.0;
  double radius_mm = 0.0;
  /// Strain inside the inclusion relative to the background (< 1 = stiffer).
  double strain_ratio = 0.5;
};

/// Continuous deformation with exact closed-form displacement. The sign
/// convention matches the forward flow: frame2(x + u(x)) shows the material
/// that frame1 shows at x.
struct GroundTruthDeformation {
  DeformationKind kind = DeformationKind::uniform_strain;
  double axial_strain = 0.02;
  std::optional<InclusionSpec> inclusion;
  std::optional<DisplacementField> grid;  // pixels, for custom_grid
  bool enforce_strain_range = true;       // |strain| in [0.005, 0.05] (or exactly 0)
};

void validate(const GroundTruthDeformation& d);

/// Displacement in mm at a continuous position.
struct Displacement2 {
  double axial_mm = 0.0;
  double lateral_mm = 0.0;
};
Displacement2 displacement_at(const GroundTruthDeformation& d, double z_mm, double x_mm,
                              const ImagingGrid& grid);

struct DeformedPair {
  RfFrame frame;                // re-rendered second frame
  DisplacementField truth;      // dense forward displacement, pixels
};

/// Moves each scatterer by the continuous deformation evaluated at its
/// position and re-renders; also samples the exact displacement on the pixel
/// grid (axial in samples, lateral in lines).
DeformedPair deform_and_render(const ScattererField& scatterers,
                               const GroundTruthDeformation& deformation, const PsfParams& psf,
                               const ImagingGrid& grid, const std::string& frame_id = "phantom_b");

struct PhantomPair {
  RfFrame frame1;
  RfFrame frame2;
  DisplacementField truth;
  ScattererField scatterers;
};

PhantomPair make_phantom_pair(const ImagingGrid& grid, const PsfParams& psf,
                              const GroundTruthDeformation& deformation, double density_per_mm2,
                              uint64_t seed, const std::string& id_prefix = "pair");

}  // namespace elastoflow::phantom
