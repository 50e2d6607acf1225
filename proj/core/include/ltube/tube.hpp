#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ltube/geometry.hpp"

namespace ltube {

/// Square hole punched through the bulkhead, in bulkhead face coordinates.
struct HoleSpec {
    double side{0.1};
    double offset_u{0.2};
    double offset_v{0.2};

    friend bool operator==(const HoleSpec&, const HoleSpec&) = default;
};

/// Parameters of one cell. The cell is [0,h] x [0,1] x [0,1] in cell-local
/// coordinates; x is longitudinal.
struct CellParameters {
    double h{12.0};
    double g{0.05};
    double rho{0.55};
    /// Longitudinal (meridian) curvature radius of the cigars; infinity gives
    /// straight cylinders.
    double r_long{1200.0};
    HoleSpec hole;
    /// Transverse displacement of each cigar axis from its cell edge, in
    /// corner order (0,0), (1,0), (1,1), (0,1).
    std::array<Vec2, 4> axis_offsets{};
    bool cigars{true};
    bool bulkhead{true};

    friend bool operator==(const CellParameters& a, const CellParameters& b);
};

/// Named presets: the default cell, its straight-cylinder limit without
/// bulkhead, a cell with no scatterers, and a flat-only cell (bulkhead kept).
enum class TemplatePreset { Appendix, Cylindrical, Empty, Flat };

CellParameters preset_parameters(TemplatePreset preset);
TemplatePreset parse_preset(const std::string& name);

/// Validated cell parameters.
class CellTemplate {
  public:
    /// Throws InvalidGeometry naming the violated constraint.
    explicit CellTemplate(const CellParameters& p);
    /// Skips validation; for deliberately corrupted fixtures only.
    static CellTemplate unchecked(const CellParameters& p);

    const CellParameters& parameters() const { return params_; }

  private:
    struct Unchecked {};
    CellTemplate(const CellParameters& p, Unchecked) : params_(p) {}
    CellParameters params_;
};

/// Throws InvalidGeometry if the parameters violate a cell constraint.
void validate_cell(const CellParameters& p);

CellTemplate build_appendix_cell(double h, double g, double rho, double r_long, const HoleSpec& hole);

/// Closed-form constants of the finite-horizon / head-on estimates.
struct DerivedConstants {
    double gamma{0};  // vertex angle of the transverse diamond
    std::int64_t M{0};
    double L1{0};
    double L2{0};
    double L3{0};
    double L{0};
    std::int64_t K3{0};
    double eta{0};
    double eps{0};
};

DerivedConstants derived_constants(const CellTemplate& t);

/// Indices of scatterers inside a cell.
namespace scatterer {
inline constexpr int kBulkhead = 4;
inline constexpr int kFacetLeft = 5;   // x = 0 square facet
inline constexpr int kFacetRight = 6;  // x = h square facet
inline constexpr int kSideFirst = 7;   // y=0, y=1, z=0, z=1
inline constexpr int kGateLeft = 11;   // G1, inner normal +x
inline constexpr int kGateRight = 12;  // G2, inner normal -x
}  // namespace scatterer

/// The realized scatterer set of one cell, in cell-local coordinates.
struct CellConfig {
    std::int64_t n{0};
    CellParameters omega;
    int template_index{0};
    std::vector<Surface> surfaces;
    /// Indices into `surfaces` of the solid pieces used for seam detection.
    std::vector<int> solid_pieces;

    double h() const { return omega.h; }
    /// Surfaces shifted to world coordinates (translated by n * tau).
    std::vector<Surface> world_surfaces() const;
    int find(int scatterer_index, int piece = 0) const;
    /// Indices of dispersing pieces.
    std::vector<int> dispersing() const;
    /// True when p is inside the cell box and outside every cigar.
    bool is_free(const Vec3& p) const;
    /// Distance from p to the nearest solid piece other than `exclude_scatterer`.
    double seam_distance(const Vec3& p, int exclude_scatterer) const;
};

/// Builds the surfaces of a cell with parameters p at index n.
CellConfig build_cell(const CellParameters& p, std::int64_t n, int template_index = 0);

enum class TubeMode { Perturbed, FiniteOmega };

/// Serializable description of a quenched tube.
struct TubeConfig {
    CellParameters cell;
    std::uint64_t seed{0};
    double perturbation{0};
    TubeMode mode{TubeMode::Perturbed};
    /// Template list for finite-omega mode.
    std::vector<CellParameters> templates;
    bool validate{true};

    friend bool operator==(const TubeConfig&, const TubeConfig&) = default;
};

std::string serialize(const TubeConfig& c);
/// Throws ConfigError on malformed text.
TubeConfig parse_tube_config(const std::string& text);

/// Bi-infinite tube of lazily realized, cached cells. Cell n is a pure
/// function of (seed, n).
class QuenchedTube {
  public:
    explicit QuenchedTube(TubeConfig config);

    const TubeConfig& config() const { return config_; }
    const CellTemplate& cell_template() const { return template_; }
    const DerivedConstants& constants() const { return constants_; }
    double h() const { return config_.cell.h; }

    /// Cached realization; safe for concurrent readers.
    const CellConfig& cell(std::int64_t n) const;

  private:
    TubeConfig config_;
    CellTemplate template_;
    DerivedConstants constants_;
    mutable std::shared_mutex mutex_;
    mutable std::unordered_map<std::int64_t, std::unique_ptr<const CellConfig>> cache_;
};

/// Per-cell parameter draw; deterministic in (seed, n). Throws
/// InvalidGeometry if the perturbed cell violates a constraint.
CellConfig realize_cell(const QuenchedTube& tube, std::int64_t n);

/// Stream identifiers of the per-cell draws.
namespace draw {
inline constexpr std::uint64_t kRho = 0;
inline constexpr std::uint64_t kRLong = 1;
inline constexpr std::uint64_t kAxisFirst = 2;  // 8 streams: 4 axes x (dy, dz)
inline constexpr std::uint64_t kHoleU = 10;
inline constexpr std::uint64_t kHoleV = 11;
inline constexpr std::uint64_t kTemplate = 0xF1;
}  // namespace draw

}  // namespace ltube
