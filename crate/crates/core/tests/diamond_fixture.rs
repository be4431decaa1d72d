//! The checked-in diamond bitmap is produced by a plain per-row evaluator
//! written from the printed constants, independent of the network code.

use neuro01::fixture::{diamond_network, PRINTED_LAYERS, PRINT_HALF_ULP};
use neuro01::verify::{grid_points, render_bitmap, BOUNDARY_TOL, DIAMOND_BITMAP, GRID};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/diamond_bitmap.txt");

/// Per-row evaluation of the printed active neurons. Active first-layer
/// neurons are the first four, so their outputs index directly.
fn reference_bit(x: [f64; 3]) -> Option<bool> {
    let mut prev: Vec<bool> = Vec::new();
    for (l, layer) in PRINTED_LAYERS.iter().enumerate() {
        let mut cur = Vec::new();
        for &(support, weights, bias) in layer.iter() {
            let norm = (weights.iter().map(|w| w * w).sum::<f64>()).sqrt();
            let mut pre = 0.0;
            for (&j, &w) in support.iter().zip(weights) {
                let input = if l == 0 { x[j] } else if prev[j] { 1.0 } else { 0.0 };
                pre += w / norm * input;
            }
            let c = if l == 0 { bias } else { bias - PRINT_HALF_ULP };
            if l == 0 && (pre - c).abs() < BOUNDARY_TOL {
                return None;
            }
            cur.push(pre > c);
        }
        prev = cur;
    }
    Some(prev[0])
}

fn reference_bitmap() -> String {
    let pts = grid_points();
    let mut s = String::new();
    for (i, row) in pts.rows().into_iter().enumerate() {
        s.push(match reference_bit([row[0], row[1], row[2]]) {
            None => '?',
            Some(true) => '1',
            Some(false) => '0',
        });
        if i % GRID == GRID - 1 {
            s.push('\n');
        }
    }
    s
}

#[test]
fn checked_in_bitmap_matches_reference() {
    let reference = reference_bitmap();
    if std::env::var_os("UPDATE_FIXTURES").is_some() {
        std::fs::write(FIXTURE, &reference).unwrap();
        return;
    }
    assert_eq!(DIAMOND_BITMAP, reference);
}

#[test]
fn network_matches_checked_in_bitmap() {
    let net = diamond_network().unwrap();
    assert_eq!(render_bitmap(&net).unwrap(), DIAMOND_BITMAP);
}

#[test]
fn bitmap_shape_and_region() {
    let lines: Vec<&str> = DIAMOND_BITMAP.lines().collect();
    assert_eq!(lines.len(), GRID);
    assert!(lines.iter().all(|l| l.len() == GRID));
    let ones = DIAMOND_BITMAP.matches('1').count();
    assert!(ones > 0);
    assert!(ones < GRID * GRID / 2);
    assert_eq!(DIAMOND_BITMAP.matches('?').count(), 0);
}
