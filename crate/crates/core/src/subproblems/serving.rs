use super::ServingSchedule;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Capacity head-room required of the chosen slots.
const SAFETY: f64 = 1.2;

/// Greedy choice of Bob's slots: take window slots by decreasing rate
/// (lower index first on ties) until they carry `SAFETY·S_b`. If the whole
/// window carries `S_b` but not the head-room, the whole window is used.
pub fn select_serving_slots(s: &Scenario, r_b: &[f64]) -> Result<ServingSchedule> {
    let mut out = ServingSchedule::none(s.n);
    if s.s_b <= 0.0 {
        return Ok(out);
    }
    let bits = |i: usize| s.slot_len * r_b[i] * s.bandwidth;
    let mut order: Vec<usize> = s.window().filter(|&i| r_b[i] > 0.0).collect();
    order.sort_by(|&a, &b| r_b[b].partial_cmp(&r_b[a]).unwrap().then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&i| bits(i)).sum();
    if total < s.s_b {
        return Err(Error::Infeasible(format!(
            "Bob's request window [{}, {}] carries {:.4e} bits, S_b = {:.4e}",
            s.bob_request_window[0], s.bob_request_window[1], total, s.s_b
        )));
    }
    let target = (SAFETY * s.s_b).min(total);
    let mut acc = 0.0;
    for i in order {
        if acc >= target {
            break;
        }
        out.serving[i] = true;
        acc += bits(i);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;

    #[test]
    fn empty_without_demand() {
        let mut s = default_scenario().scaled_to(5);
        s.s_b = 0.0;
        assert_eq!(select_serving_slots(&s, &[1.0; 5]).unwrap().count(), 0);
    }

    #[test]
    fn ties_take_earliest() {
        let mut s = default_scenario().scaled_to(8);
        // three slots at 10 b/s/Hz carry 30 Mbit ≥ 1.2 × 25 Mbit
        s.s_b = 25e6;
        let sel = select_serving_slots(&s, &[10.0; 8]).unwrap();
        assert_eq!(sel.serving, vec![true, true, true, false, false, false, false, false]);
    }

    #[test]
    fn window_too_small() {
        let mut s = default_scenario().scaled_to(4);
        s.bob_request_window = [2, 3];
        s.s_b = 50e6;
        assert!(select_serving_slots(&s, &[10.0; 4]).unwrap_err().is_infeasible());
    }
}
