//! Hard-limit enforcement applied on top of a proposal set.

/// A transmission proposed by one packet for the current slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub uid: u64,
    pub node: usize,
    pub link: usize,
    pub option: usize,
    pub ttg: u32,
    pub size: f64,
    /// Energy of this transmission (per-unit energy times size).
    pub energy: f64,
}

/// Slack allowed when comparing accumulated sizes or energies to a limit.
pub const LIMIT_SLACK: f64 = 1e-9;

/// Per link, keeps proposals in earliest-deadline-first order (ties by uid)
/// while their total size fits in the capacity. `None` caps are unbounded.
/// Returns `(scheduled, rejected)` as indices into `proposals`.
pub fn truncate_link(proposals: &[Proposal], caps: &[Option<f64>]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..proposals.len()).collect();
    order.sort_by_key(|&k| (proposals[k].link, proposals[k].ttg, proposals[k].uid));
    let mut used = vec![0.0; caps.len()];
    let mut scheduled = Vec::new();
    let mut rejected = Vec::new();
    for k in order {
        let p = &proposals[k];
        match caps.get(p.link).copied().flatten() {
            Some(c) if used[p.link] + p.size > c + LIMIT_SLACK => rejected.push(k),
            _ => {
                used[p.link] += p.size;
                scheduled.push(k);
            }
        }
    }
    (scheduled, rejected)
}

/// Per node, sorts proposals by energy (largest first, ties by uid) and
/// keeps the longest prefix whose energy sum is at most the peak.
pub fn truncate_peak(proposals: &[Proposal], peaks: &[Option<f64>]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..proposals.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&proposals[a], &proposals[b]);
        pa.node
            .cmp(&pb.node)
            .then(pb.energy.total_cmp(&pa.energy))
            .then(pa.uid.cmp(&pb.uid))
    });
    let mut used = vec![0.0; peaks.len()];
    let mut full = vec![false; peaks.len()];
    let mut scheduled = Vec::new();
    let mut rejected = Vec::new();
    for k in order {
        let p = &proposals[k];
        let Some(cap) = peaks.get(p.node).copied().flatten() else {
            scheduled.push(k);
            continue;
        };
        if full[p.node] || used[p.node] + p.energy > cap + LIMIT_SLACK {
            full[p.node] = true;
            rejected.push(k);
        } else {
            used[p.node] += p.energy;
            scheduled.push(k);
        }
    }
    (scheduled, rejected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prop(uid: u64, node: usize, link: usize, ttg: u32, energy: f64) -> Proposal {
        Proposal {
            uid,
            node,
            link,
            option: 0,
            ttg,
            size: 1.0,
            energy,
        }
    }

    #[test]
    fn link_edf() {
        let ps = [prop(0, 0, 0, 3, 1.0), prop(1, 0, 0, 1, 1.0), prop(2, 0, 0, 2, 1.0)];
        let (s, r) = truncate_link(&ps, &[Some(2.0)]);
        assert_eq!(s, vec![1, 2]);
        assert_eq!(r, vec![0]);
    }

    #[test]
    fn link_within_capacity_and_zero() {
        let ps = [prop(0, 0, 0, 3, 1.0), prop(1, 0, 1, 1, 1.0)];
        let (s, r) = truncate_link(&ps, &[Some(1.0), Some(1.0)]);
        assert_eq!((s.len(), r.len()), (2, 0));
        let (s, r) = truncate_link(&ps, &[Some(0.0), Some(0.0)]);
        assert_eq!((s.len(), r.len()), (0, 2));
        let (s, _) = truncate_link(&ps, &[None, None]);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn link_ties_by_uid() {
        let ps = [prop(5, 0, 0, 2, 1.0), prop(3, 0, 0, 2, 1.0)];
        let (s, _) = truncate_link(&ps, &[Some(1.0)]);
        assert_eq!(s, vec![1]);
    }

    #[test]
    fn peak_prefix_rule() {
        let ps = [prop(0, 0, 0, 1, 1.0), prop(1, 0, 1, 1, 3.0), prop(2, 0, 2, 1, 2.0)];
        let (s, r) = truncate_peak(&ps, &[Some(4.0)]);
        assert_eq!(s, vec![1]);
        assert_eq!(r, vec![2, 0]);
        let (s, _) = truncate_peak(&ps, &[Some(6.0)]);
        assert_eq!(s.len(), 3);
        let (s, _) = truncate_peak(&ps, &[Some(0.0)]);
        assert!(s.is_empty());
        // exactly at the peak is allowed
        let (s, _) = truncate_peak(&ps[1..2], &[Some(3.0)]);
        assert_eq!(s, vec![0]);
    }
}
