//! Feasible tours of the reduced instance (kept segments plus required
//! portals). Their portal crossings supply the configurations the outer
//! DP enumerates.

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::two_opt;
use crate::geometry::{uncross, Binding, Point, Tour, TourPoint};
use crate::oracle::{optimize_chain, Site, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeedSite {
    pub site: Site,
    pub binding: Binding,
}

impl SeedSite {
    fn mid(&self) -> Point {
        Point::new(self.site.x, 0.5 * (self.site.lo + self.site.hi))
    }
}

/// Local search with true chain costs is used up to this many sites.
const EXACT_SEARCH_MAX: usize = 24;

fn chain_cost(sites: &[SeedSite], order: &[usize]) -> f64 {
    let s: Vec<Site> = order.iter().map(|&i| sites[i].site).collect();
    optimize_chain(&s, None, true, None, None, 1e-9, 2000).cost
}

/// 2-opt and single-site relocation, first improvement, on chain costs.
fn improve(sites: &[SeedSite], order: &mut Vec<usize>) {
    let n = order.len();
    if n < 4 || n > EXACT_SEARCH_MAX {
        return;
    }
    let mut best = chain_cost(sites, order);
    let mut rounds = 0;
    'outer: while rounds < 50 {
        rounds += 1;
        for i in 0..n - 1 {
            for j in i + 2..n {
                let mut cand = order.clone();
                cand[i + 1..=j].reverse();
                let c = chain_cost(sites, &cand);
                if c < best - 1e-9 * best.max(1.0) {
                    *order = cand;
                    best = c;
                    continue 'outer;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut cand = order.clone();
                let v = cand.remove(i);
                cand.insert(j, v);
                let c = chain_cost(sites, &cand);
                if c < best - 1e-9 * best.max(1.0) {
                    *order = cand;
                    best = c;
                    continue 'outer;
                }
            }
        }
        break;
    }
}

fn nearest_neighbour(mids: &[Point], start: usize) -> Vec<usize> {
    let n = mids.len();
    let mut used = vec![false; n];
    let mut order = vec![start];
    used[start] = true;
    for _ in 1..n {
        let last = mids[*order.last().unwrap()];
        let next = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| last.dist(mids[a]).total_cmp(&last.dist(mids[b])).then(a.cmp(&b)))
            .unwrap();
        used[next] = true;
        order.push(next);
    }
    order
}

/// Right along the upper half, back along the lower half.
fn sweep_order(mids: &[Point]) -> Vec<usize> {
    let mut ys: Vec<f64> = mids.iter().map(|p| p.y).collect();
    ys.sort_by(f64::total_cmp);
    let median = ys[ys.len() / 2];
    let mut up: Vec<usize> = (0..mids.len()).filter(|&i| mids[i].y >= median).collect();
    let mut down: Vec<usize> = (0..mids.len()).filter(|&i| mids[i].y < median).collect();
    up.sort_by(|&a, &b| mids[a].x.total_cmp(&mids[b].x));
    down.sort_by(|&a, &b| mids[b].x.total_cmp(&mids[a].x));
    up.extend(down);
    up
}

fn canonical(order: &[usize]) -> Vec<usize> {
    let n = order.len();
    let p = order.iter().position(|&v| v == 0).unwrap_or(0);
    let fwd: Vec<usize> = (0..n).map(|k| order[(p + k) % n]).collect();
    let bwd: Vec<usize> = (0..n).map(|k| order[(p + n - k) % n]).collect();
    fwd.min(bwd)
}

fn realize(sites: &[SeedSite], order: &[usize]) -> Tour {
    let s: Vec<Site> = order.iter().map(|&i| sites[i].site).collect();
    let r = optimize_chain(&s, None, true, None, None, DEFAULT_TOL, DEFAULT_MAX_SWEEPS);
    let pts = order
        .iter()
        .zip(&r.ys)
        .map(|(&i, &y)| TourPoint::new(Point::new(sites[i].site.x, y), sites[i].binding))
        .collect();
    let t = Tour::closed(pts).dedup();
    match uncross(&t) {
        Ok(u) => u,
        Err(stalled) => stalled.partial,
    }
}

/// Up to `count` distinct locally optimal tours through all sites.
pub fn seed_tours(sites: &[SeedSite], count: usize, seed: u64) -> Vec<Tour> {
    let n = sites.len();
    if n == 0 {
        return vec![];
    }
    if n <= 2 {
        return vec![realize(sites, &(0..n).collect::<Vec<_>>())];
    }
    let mids: Vec<Point> = sites.iter().map(SeedSite::mid).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.shuffle(&mut rng);
    let mut orders = vec![sweep_order(&mids)];
    orders.extend(starts.iter().take(count.max(1)).map(|&s| nearest_neighbour(&mids, s)));
    let mut seen = Vec::new();
    let mut out = Vec::new();
    for mut o in orders {
        two_opt(&mut o, &mids, 10_000);
        improve(sites, &mut o);
        let c = canonical(&o);
        if seen.contains(&c) {
            continue;
        }
        seen.push(c);
        out.push(realize(sites, &o));
        if out.len() >= count.max(1) {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tour_cost;

    #[test]
    fn seeds_visit_every_site() {
        let sites: Vec<SeedSite> = (0..7)
            .map(|i| SeedSite {
                site: Site {
                    x: i as f64 * 3.0,
                    lo: (i * 5 % 7) as f64,
                    hi: (i * 5 % 7) as f64 + 1.0,
                },
                binding: Binding::Segment(i),
            })
            .collect();
        let tours = seed_tours(&sites, 4, 1);
        assert!(!tours.is_empty());
        for t in &tours {
            for (i, s) in sites.iter().enumerate() {
                assert!(t.points.iter().any(|p| p.binding == Binding::Segment(i)
                    && (p.pos.x - s.site.x).abs() < 1e-9
                    && p.pos.y >= s.site.lo - 1e-9
                    && p.pos.y <= s.site.hi + 1e-9));
            }
            assert!(tour_cost(t) > 0.0);
        }
    }
}
