//! Heel-strike and toe-off detection from vertical ground reaction force.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    HeelStrike,
    ToeOff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaitEvent {
    pub kind: EventKind,
    pub index: usize,
}

/// Heel strike followed by the next toe-off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StridePair {
    pub heel_strike: usize,
    pub toe_off: usize,
}

/// Threshold crossings that persist for at least `debounce` samples.
///
/// A heel strike is the first sample of a run at or above `threshold`, a toe-off
/// the first sample of a run below it. Runs shorter than `debounce` are
/// treated as noise and do not change the contact state. The state at the
/// first sample produces no event.
pub fn detect_events(grf: &[f64], threshold: f64, debounce: usize) -> Result<Vec<GaitEvent>> {
    if grf.is_empty() {
        return Err(Error::NoEvents);
    }
    if let Some(i) = grf.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite force at sample {i}")));
    }
    let debounce = debounce.max(1);
    let mut contact = grf[0] >= threshold;
    let mut events = Vec::new();
    let mut i = 1;
    while i < grf.len() {
        let above = grf[i] >= threshold;
        if above != contact {
            let run = grf[i..]
                .iter()
                .take(debounce)
                .take_while(|v| (**v >= threshold) == above)
                .count();
            // a run cut short by the end of the record cannot be confirmed
            if run >= debounce {
                contact = above;
                events.push(GaitEvent {
                    kind: if above {
                        EventKind::HeelStrike
                    } else {
                        EventKind::ToeOff
                    },
                    index: i,
                });
                i += run;
                continue;
            }
        }
        i += 1;
    }
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    Ok(events)
}

/// Pairs each heel strike with the following toe-off. Events must alternate
/// with increasing indices; a leading toe-off is skipped.
pub fn pair_events(events: &[GaitEvent]) -> Result<Vec<StridePair>> {
    let bad: Vec<usize> = events
        .windows(2)
        .filter(|w| w[0].kind == w[1].kind || w[1].index <= w[0].index)
        .map(|w| w[1].index)
        .collect();
    if !bad.is_empty() {
        return Err(Error::EventAlternation { indices: bad });
    }
    let start = events
        .iter()
        .position(|e| e.kind == EventKind::HeelStrike)
        .ok_or(Error::NoEvents)?;
    Ok(events[start..]
        .chunks(2)
        .filter(|c| c.len() == 2)
        .map(|c| StridePair {
            heel_strike: c[0].index,
            toe_off: c[1].index,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n_strides: usize, period: usize, stance: usize) -> Vec<f64> {
        (0..n_strides * period)
            .map(|i| if i % period < stance { 600.0 } else { 0.0 })
            .collect()
    }

    #[test]
    fn square_wave_exact_indices() {
        // 1 Hz strides at 1 kHz, 60 % stance, starting in swing
        let mut grf = vec![0.0; 200];
        grf.extend(square(3, 1000, 600));
        let ev = detect_events(&grf, 20.0, 50).unwrap();
        let idx: Vec<usize> = ev.iter().map(|e| e.index).collect();
        assert_eq!(idx, vec![200, 800, 1200, 1800, 2200, 2800]);
        assert_eq!(ev[0].kind, EventKind::HeelStrike);
        let pairs = pair_events(&ev).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(
            pairs[1],
            StridePair {
                heel_strike: 1200,
                toe_off: 1800
            }
        );
    }

    #[test]
    fn spikes_are_debounced() {
        let mut clean = vec![0.0; 200];
        clean.extend(square(3, 1000, 600));
        let mut noisy = clean.clone();
        for start in [350, 1500, 2000] {
            for v in &mut noisy[start..start + 5] {
                *v = if *v > 0.0 { 0.0 } else { 600.0 };
            }
        }
        assert_eq!(
            detect_events(&noisy, 20.0, 50).unwrap(),
            detect_events(&clean, 20.0, 50).unwrap()
        );
    }

    #[test]
    fn no_events() {
        assert!(matches!(detect_events(&[0.0; 500], 20.0, 50), Err(Error::NoEvents)));
        assert!(matches!(detect_events(&[], 20.0, 50), Err(Error::NoEvents)));
    }

    #[test]
    fn alternation_violation_lists_indices() {
        let ev = [
            GaitEvent {
                kind: EventKind::HeelStrike,
                index: 10,
            },
            GaitEvent {
                kind: EventKind::ToeOff,
                index: 70,
            },
            GaitEvent {
                kind: EventKind::ToeOff,
                index: 90,
            },
            GaitEvent {
                kind: EventKind::HeelStrike,
                index: 120,
            },
        ];
        match pair_events(&ev) {
            Err(Error::EventAlternation { indices }) => assert_eq!(indices, vec![90]),
            other => panic!("{other:?}"),
        }
    }
}
