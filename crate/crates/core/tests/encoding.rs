use std::collections::BTreeSet;

use geofence_core::encoding::*;
use geofence_core::hve::plain_match;
use geofence_core::minimize::{minimize, minimize_zone};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Reflected Gray sequence built literally: prefix 0 to G_k, then 1 to G_k reversed.
fn reflected(nbits: u32) -> Vec<String> {
    let mut seq = vec![String::new()];
    for _ in 0..nbits {
        let mut next: Vec<String> = seq.iter().map(|g| format!("0{g}")).collect();
        next.extend(seq.iter().rev().map(|g| format!("1{g}")));
        seq = next;
    }
    seq
}

#[test]
fn three_by_three_baseline() {
    let g = GridSpec::with_side(3).unwrap();
    let u1 = CellId::base(0, 0);
    assert_eq!(baseline_position(&g, u1).unwrap(), 1);
    assert_eq!(baseline_index(&g, u1).unwrap().to_string(), "100000000");
    // Cells 3, 8 and 9 in row-major order starting at the top-left.
    let zone = AlertZone::from_xy(&g, [(2, 0), (1, 2), (2, 2)], Shape::Freeform).unwrap();
    assert_eq!(baseline_token(&g, &zone).unwrap().to_string(), "00*0000**");
    assert!(hier_id(&g, u1).is_err());
}

#[test]
fn full_domain_baseline_token() {
    let g = GridSpec::new(4).unwrap();
    let zone = AlertZone::new(&g, g.base_cells(), Shape::Square).unwrap();
    assert_eq!(baseline_token(&g, &zone).unwrap().to_string(), "*".repeat(16));
}

#[test]
fn hier_ids_d4() {
    let g = GridSpec::new(4).unwrap();
    let ids: Vec<(CellId, String)> = g.base_cells().map(|c| (c, hier_id(&g, c).unwrap())).collect();
    let set: BTreeSet<&String> = ids.iter().map(|(_, s)| s).collect();
    assert_eq!(set.len(), 16);
    assert!(ids.iter().all(|(_, s)| s.len() == 4));
    for (a, sa) in &ids {
        for (b, sb) in &ids {
            let siblings = a.x / 2 == b.x / 2 && a.y / 2 == b.y / 2;
            assert_eq!(siblings, sa[..2] == sb[..2], "{a} {b}");
        }
    }
    // Top-right quadrant, then its bottom-left child.
    assert_eq!(hier_id(&g, CellId::base(2, 1)).unwrap(), "1001");
}

#[test]
fn seven_cell_zone_ids() {
    let g = GridSpec::new(4).unwrap();
    let zone = AlertZone::from_xy(
        &g,
        [(2, 0), (3, 0), (2, 1), (3, 1), (3, 2), (3, 3), (1, 0)],
        Shape::Freeform,
    )
    .unwrap();
    let ids = zone_to_cellset(&g, &zone, Encoding::Hierarchical).unwrap();
    let expected: BTreeSet<String> = ["1000", "1010", "1001", "1011", "1110", "1111", "0010"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    assert_eq!(ids, expected);
}

#[test]
fn gray_matches_reflected_recursion() {
    assert_eq!(gray_code(2, 2).unwrap(), "11");
    assert_eq!(gray_code(3, 4).unwrap(), "110");
    assert_eq!(reflected(2), ["00", "01", "11", "10"]);
    for nbits in 1..=10 {
        let seq = reflected(nbits);
        for (n, g) in seq.iter().enumerate() {
            assert_eq!(&gray_code(nbits, n as u32).unwrap(), g);
        }
    }
    assert!(gray_code(3, 8).is_err());
}

#[test]
fn gray_adjacency_up_to_1024() {
    for nbits in 1..=10u32 {
        for n in 0..(1u32 << nbits) - 1 {
            assert_eq!((gray(n) ^ gray(n + 1)).count_ones(), 1);
        }
    }
}

#[test]
fn gray_ids_put_rows_first() {
    // At d=8, (4,0) is row 000 and column 110.
    let g = GridSpec::new(8).unwrap();
    assert_eq!(gray_id(&g, CellId::base(4, 0)).unwrap(), "000110");
    assert_eq!(gray_id(&g, CellId::base(5, 1)).unwrap(), "001111");
}

#[test]
fn width_law() {
    for (d, w) in [(16, 8), (64, 12), (256, 16), (1024, 20)] {
        let g = GridSpec::new(d).unwrap();
        assert_eq!(width(&g, Encoding::Baseline).unwrap(), (d * d) as usize);
        assert_eq!(width(&g, Encoding::Hierarchical).unwrap(), w);
        assert_eq!(width(&g, Encoding::Gray).unwrap(), w);
        let c = CellId::base(d - 1, d / 3);
        assert_eq!(hier_id(&g, c).unwrap().len(), w);
        assert_eq!(gray_id(&g, c).unwrap().len(), w);
        assert_eq!(index_vector(&g, c, Encoding::Gray).unwrap().width(), w);
    }
}

#[test]
fn encodings_are_bijective() {
    for d in [2u32, 8, 64] {
        let g = GridSpec::new(d).unwrap();
        for e in [Encoding::Hierarchical, Encoding::Gray] {
            let codes: BTreeSet<u64> = g.base_cells().map(|c| cell_code(&g, c, e).unwrap()).collect();
            assert_eq!(codes.len(), g.cell_count());
            assert_eq!(*codes.last().unwrap(), g.cell_count() as u64 - 1);
        }
    }
}

#[test]
fn singleton_and_full_cellsets() {
    let g = GridSpec::new(8).unwrap();
    let one = AlertZone::from_xy(&g, [(3, 5)], Shape::Freeform).unwrap();
    assert_eq!(zone_to_cellset(&g, &one, Encoding::Gray).unwrap().len(), 1);
    let all = AlertZone::new(&g, g.base_cells(), Shape::Square).unwrap();
    assert_eq!(zone_to_cellset(&g, &all, Encoding::Hierarchical).unwrap().len(), 64);
}

fn check_equivalence(g: &GridSpec, zone: &AlertZone) {
    let baseline = baseline_token(g, zone).unwrap();
    for e in [Encoding::Hierarchical, Encoding::Gray] {
        let tokens = minimize_zone(g, zone, e).unwrap().patterns();
        for cell in g.base_cells() {
            let base = plain_match(&baseline_index(g, cell).unwrap(), &baseline).unwrap();
            let index = index_vector(g, cell, e).unwrap();
            let encoded = tokens.iter().any(|t| plain_match(&index, t).unwrap());
            assert_eq!(base, encoded, "{e} {cell}");
            assert_eq!(base, zone.contains(&cell));
        }
    }
}

#[test]
fn baseline_and_binary_encodings_agree() {
    for d in [2u32, 4] {
        let g = GridSpec::new(d).unwrap();
        let cells: Vec<CellId> = g.base_cells().collect();
        for mask in 1u32..1 << cells.len() {
            let zone = AlertZone::new(
                &g,
                cells.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, c)| *c),
                Shape::Freeform,
            )
            .unwrap();
            check_equivalence(&g, &zone);
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    for d in [8u32, 16] {
        let g = GridSpec::new(d).unwrap();
        for _ in 0..60 {
            let density: f64 = rng.random_range(0.02..0.9);
            let mut cells: Vec<CellId> = g.base_cells().filter(|_| rng.random_bool(density)).collect();
            if cells.is_empty() {
                cells.push(CellId::base(0, 0));
            }
            let zone = AlertZone::new(&g, cells, Shape::Freeform).unwrap();
            check_equivalence(&g, &zone);
        }
    }
}

#[test]
fn seven_cell_zone_minimizes_to_three_tokens() {
    let ids: BTreeSet<String> = ["1000", "1010", "1001", "1011", "1110", "1111", "0010"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let cover = minimize(&ids).unwrap();
    assert_eq!(cover.to_string(), "{1*1*, 10**, *010}");
}
