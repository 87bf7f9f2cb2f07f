use super::propagation::RX_HEIGHT_M;
use super::Scene;
use crate::dataset::LosState;

/// One grid cell crossed by the horizontal projection of a segment, with
/// the parameter interval `[t_enter, t_exit]` spent inside it.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Crossing {
    pub row: usize,
    pub col: usize,
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Grid traversal from the centre of `from` to the centre of `to`,
/// visiting every cell whose interior the segment passes through.
pub(crate) fn crossed_cells(from: (usize, usize), to: (usize, usize)) -> Vec<Crossing> {
    let p0 = (from.0 as f64 + 0.5, from.1 as f64 + 0.5);
    let d = (to.0 as f64 - from.0 as f64, to.1 as f64 - from.1 as f64);

    let axis = |p: f64, dir: f64| -> (i64, f64, f64) {
        if dir > 0.0 {
            (1, (p.floor() + 1.0 - p) / dir, 1.0 / dir)
        } else if dir < 0.0 {
            (-1, (p - p.floor()) / -dir, -1.0 / dir)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_r, mut t_max_r, t_delta_r) = axis(p0.0, d.0);
    let (step_c, mut t_max_c, t_delta_c) = axis(p0.1, d.1);

    let (mut r, mut c) = (from.0 as i64, from.1 as i64);
    let mut t = 0.0;
    let mut out = Vec::new();
    let limit = from.0.abs_diff(to.0) + from.1.abs_diff(to.1) + 2;
    for _ in 0..limit {
        let t_next = t_max_r.min(t_max_c).min(1.0);
        out.push(Crossing {
            row: r as usize,
            col: c as usize,
            t_enter: t,
            t_exit: t_next,
        });
        if t_next >= 1.0 || (r as usize, c as usize) == to {
            break;
        }
        // A tie passes exactly through a corner; step diagonally.
        if (t_max_r - t_max_c).abs() < 1e-12 {
            r += step_r;
            t_max_r += t_delta_r;
            c += step_c;
            t_max_c += t_delta_c;
        } else if t_max_r < t_max_c {
            r += step_r;
            t_max_r += t_delta_r;
        } else {
            c += step_c;
            t_max_c += t_delta_c;
        }
        t = t_next;
    }
    out
}

/// Blocking buildings along the path, excluding the transmitter's own roof.
pub(crate) fn obstructions(scene: &Scene, rx: (usize, usize)) -> Vec<usize> {
    let tx = scene.tx();
    let tx_building = scene.tx_building();
    let z0 = tx.height_m as f64;
    let z1 = RX_HEIGHT_M as f64;
    let mut blockers: Vec<usize> = Vec::new();
    for cell in crossed_cells((tx.row, tx.col), rx) {
        let Some(owner) = scene.owner_at(cell.row, cell.col) else {
            continue;
        };
        if Some(owner) == tx_building {
            continue;
        }
        let line_low = (z0 + (z1 - z0) * cell.t_enter).min(z0 + (z1 - z0) * cell.t_exit);
        if scene.height_at(cell.row, cell.col) as f64 > line_low && !blockers.contains(&owner) {
            blockers.push(owner);
        }
    }
    blockers
}

/// LOS/NLOS/NaN classification of a receiver cell.
///
/// NaN iff the cell is inside a footprint. Otherwise the segment from the
/// transmitter antenna to a receiver 2 m above ground is tested against the
/// building prism of every crossed cell; the transmitter's own building does
/// not obstruct.
pub fn line_of_sight(scene: &Scene, rx: (usize, usize)) -> LosState {
    assert!(rx.0 < scene.grid_h() && rx.1 < scene.grid_w(), "receiver outside grid");
    if scene.is_building(rx.0, rx.1) {
        return LosState::Nan;
    }
    if obstructions(scene, rx).is_empty() {
        LosState::Los
    } else {
        LosState::Nlos
    }
}
