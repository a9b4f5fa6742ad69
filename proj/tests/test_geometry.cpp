#include "hcplate/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hcp;

TEST(CellMesh, DiskQuarterRadiusOnEightGrid)
{
    InclusionShape s{ShapeKind::disk, 0.5, 0.5, 0.25};
    const CellMesh m = build_cell_mesh(s, 8, 2, 0);
    EXPECT_EQ(m.num_elements2d(), 64);
    EXPECT_EQ(m.soft_count(), 12);
}

TEST(CellMesh, SquareCentralBlock)
{
    InclusionShape s{ShapeKind::square, 0.5, 0.5, 0.25};
    const CellMesh m = build_cell_mesh(s, 4, 2, 0);
    EXPECT_EQ(m.soft_count(), 4);
    for (int e : {5, 6, 9, 10}) EXPECT_TRUE(m.is_soft(e));
}

TEST(CellMesh, InclusionTouchingBoundaryIsRejected)
{
    InclusionShape s{ShapeKind::disk, 0.5, 0.5, 0.49};
    EXPECT_THROW(build_cell_mesh(s, 8, 2, 0), GeometryError);
    InclusionShape big{ShapeKind::disk, 0.5, 0.5, 0.6};
    EXPECT_THROW(build_cell_mesh(big, 8, 2, 0), GeometryError);
}

TEST(CellMesh, ResolutionPreconditions)
{
    InclusionShape s;
    EXPECT_THROW(build_cell_mesh(s, 3, 2, 0), ConfigError);
    EXPECT_THROW(build_cell_mesh(s, 8, 3, 1), ConfigError);
    EXPECT_NO_THROW(build_cell_mesh(s, 8, 3, 2));
}

TEST(CellMesh, AreaFractionErrorDecreases)
{
    InclusionShape s{ShapeKind::disk, 0.5, 0.5, 0.3};
    double prev = 1.0;
    for (int n : {8, 16, 32}) {
        const CellMesh m = build_cell_mesh(s, n, 2, 0);
        const double err = std::abs(m.soft_fraction() - s.analytic_area());
        EXPECT_LE(err, 4.0 / n);
        EXPECT_LT(err, prev);
        prev = err;
    }
}

TEST(CellMesh, PeriodicMapIsIdempotent)
{
    InclusionShape s;
    const CellMesh m = build_cell_mesh(s, 8, 2, 0);
    const auto map = m.periodic_map();
    for (std::size_t v = 0; v < map.size(); ++v) EXPECT_EQ(map[map[v]], map[v]);
    EXPECT_EQ(map[m.node2d(8, 3)], m.node2d(0, 3));
    EXPECT_EQ(map[m.node2d(8, 8)], m.node2d(0, 0));
}

TEST(CellMesh, InteriorAndBoundaryNodesPartitionSoftNodes)
{
    InclusionShape s{ShapeKind::square, 0.5, 0.5, 0.25};
    const CellMesh m = build_cell_mesh(s, 4, 2, 0);
    const auto interior = m.inclusion_interior_nodes();
    int count = 0;
    for (char c : interior) count += c;
    EXPECT_EQ(count, 1);
    EXPECT_TRUE(interior[m.node2d(2, 2)]);
    EXPECT_EQ(m.inclusion_boundary_nodes().size(), 8u);
}

TEST(CellMesh, DiskFlaggedSmoothSquareNot)
{
    EXPECT_TRUE((InclusionShape{ShapeKind::disk, 0.5, 0.5, 0.3}).smooth_boundary());
    EXPECT_FALSE((InclusionShape{ShapeKind::square, 0.5, 0.5, 0.3}).smooth_boundary());
}

TEST(MacroMesh, LeftEdgeCounts)
{
    const MacroMesh a = build_macro_mesh(1, 1, 4, 4, {Edge::left});
    EXPECT_EQ(a.num_nodes(), 25);
    EXPECT_EQ(a.dirichlet_count(), 5);
    const MacroMesh b = build_macro_mesh(2, 1, 8, 4, {Edge::left});
    EXPECT_EQ(b.num_nodes(), 45);
    EXPECT_EQ(b.dirichlet_count(), 5);
    for (int j = 0; j <= 4; ++j) EXPECT_TRUE(b.dirichlet[b.node(0, j)]);
}

TEST(MacroMesh, EmptyDirichletSetIsRejected)
{
    EXPECT_THROW(build_macro_mesh(1, 1, 4, 4, {}), ConfigError);
    EXPECT_THROW(build_macro_mesh(1, 1, 1, 4, {Edge::left}), ConfigError);
    EXPECT_THROW(parse_edge("diagonal"), ConfigError);
}
