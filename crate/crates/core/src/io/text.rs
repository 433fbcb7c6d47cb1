//! Tab-separated text exports for plotting and scripting.

use std::fmt::Write;

use crate::grid::PrototypeSet;
use crate::score::{AssignmentMap, Provenance, RestoreRecipe};

/// One line per cell: `i j proto proto_i proto_j proto_y proto_x cost`,
/// where `(proto_y, proto_x)` is the prototype's normalized coordinate.
pub fn assignments_tsv(map: &AssignmentMap, protos: &PrototypeSet) -> String {
    let mut out = String::from("i\tj\tproto\tproto_i\tproto_j\tproto_y\tproto_x\tcost\n");
    for (cell, a) in map.cells.iter().enumerate() {
        let [y, x] = protos.coord(a.proto);
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{y}\t{x}\t{}",
            cell / map.width,
            cell % map.width,
            a.proto,
            a.proto_cell.0,
            a.proto_cell.1,
            a.cost
        );
    }
    out
}

/// One line per prototype: `proto cell_i cell_j slot sample i j similarity`.
pub fn provenance_tsv(protos: &PrototypeSet, provenance: &[Provenance]) -> String {
    let mut out = String::from("proto\tcell_i\tcell_j\tslot\tsample\ti\tj\tsimilarity\n");
    for (k, p) in provenance.iter().enumerate() {
        let (ci, cj, slot) = protos.cell_of(k);
        let _ = writeln!(out, "{k}\t{ci}\t{cj}\t{slot}\t{}\t{}\t{}\t{}", p.sample_id, p.i, p.j, p.similarity);
    }
    out
}

/// One line per test cell: `i j sample src_i src_j`.
pub fn restore_tsv(recipe: &RestoreRecipe) -> String {
    let mut out = String::from("i\tj\tsample\tsrc_i\tsrc_j\n");
    for (cell, p) in recipe.cells.iter().enumerate() {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", cell / recipe.width, cell % recipe.width, p.sample_id, p.i, p.j);
    }
    out
}

/// `image_id score` table.
pub fn scores_tsv<'a>(rows: impl IntoIterator<Item = (&'a str, f32)>) -> String {
    let mut out = String::from("image\tscore\n");
    for (id, s) in rows {
        let _ = writeln!(out, "{id}\t{s}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::ZeroVectorPolicy;
    use crate::grid::{init_prototypes, make_feature_grid};
    use crate::score::{reconstruct_prototypes, restore_image_patches, score_grid};

    #[test]
    fn exports_have_one_line_per_item() {
        let protos = init_prototypes(2, 2, 3, 4, 0.3, 2, 1, 0.0, 1.0).unwrap();
        let grid = make_feature_grid(&protos.weights()[..24], 2, 3, 4, 2).unwrap();
        let (_, map) = score_grid(&grid, &protos, ZeroVectorPolicy::Error).unwrap();
        let a = assignments_tsv(&map, &protos);
        assert_eq!(a.lines().count(), 1 + 6);
        let prov = reconstruct_prototypes(&protos, &[("s", &grid)], ZeroVectorPolicy::Error).unwrap();
        assert_eq!(provenance_tsv(&protos, &prov).lines().count(), 1 + 12);
        let recipe = restore_image_patches(&map, &prov).unwrap();
        assert_eq!(restore_tsv(&recipe).lines().count(), 1 + 6);
        assert_eq!(scores_tsv([("a", 0.5f32), ("b", 1.0)]), "image\tscore\na\t0.5\nb\t1\n");
    }
}
