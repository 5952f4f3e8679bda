// SPDX-License-Identifier: MIT OR Apache-2.0

//! Random networks and brute-force oracles shared by the integration tests.
//! Nothing here calls into the scoring or solver code it is used to check.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tradenet::BipartiteSnapshot;

pub fn product_ids(n: usize) -> Vec<String> {
    (0..n).map(|a| format!("p{a:02}")).collect()
}

pub fn country_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i:02}")).collect()
}

/// Random snapshot with up to `max_countries` × `max_products` and link
/// density drawn per instance. Every country keeps at least one link.
pub fn random_snapshot(rng: &mut ChaCha8Rng, max_countries: usize, max_products: usize) -> BipartiteSnapshot {
    let u = rng.gen_range(1..=max_countries);
    let n = rng.gen_range(1..=max_products);
    let density: f64 = rng.gen_range(0.15..0.85);
    random_snapshot_sized(rng, 2001, u, n, density)
}

pub fn random_snapshot_sized(
    rng: &mut ChaCha8Rng,
    year: i32,
    countries: usize,
    products: usize,
    density: f64,
) -> BipartiteSnapshot {
    let rows: Vec<(String, Vec<usize>)> = country_ids(countries)
        .into_iter()
        .map(|c| {
            let mut links: Vec<usize> = (0..products).filter(|_| rng.gen_bool(density)).collect();
            if links.is_empty() {
                links.push(rng.gen_range(0..products));
            }
            (c, links)
        })
        .collect();
    BipartiteSnapshot::from_rows(year, product_ids(products), rows).unwrap()
}

/// Dense 0/1 adjacency as nested vectors.
pub fn dense(s: &BipartiteSnapshot) -> Vec<Vec<bool>> {
    let n = s.products().len();
    s.rows()
        .iter()
        .map(|row| {
            let mut r = vec![false; n];
            for &a in row {
                r[a] = true;
            }
            r
        })
        .collect()
}

/// Mass-diffusion scores by explicit walk enumeration: every product the
/// country exports holds one unit, which is split evenly among that
/// product's exporters and then evenly among each exporter's products.
pub fn walk_scores(s: &BipartiteSnapshot, country: usize) -> Vec<f64> {
    let a = dense(s);
    let (u, n) = (a.len(), s.products().len());
    let mut out = vec![0.0; n];
    for start in 0..n {
        if !a[country][start] {
            continue;
        }
        let exporters: Vec<usize> = (0..u).filter(|&j| a[j][start]).collect();
        for &j in &exporters {
            let basket: Vec<usize> = (0..n).filter(|&b| a[j][b]).collect();
            for &end in &basket {
                out[end] += 1.0 / exporters.len() as f64 / basket.len() as f64;
            }
        }
    }
    out
}

/// Heat-conduction scores by explicit averaging: each country takes the mean
/// of its products' initial temperature, each product the mean over its
/// exporters.
pub fn heat_scores(s: &BipartiteSnapshot, country: usize) -> Vec<f64> {
    let a = dense(s);
    let (u, n) = (a.len(), s.products().len());
    let temperature: Vec<f64> = (0..n).map(|b| if a[country][b] { 1.0 } else { 0.0 }).collect();
    let country_heat: Vec<f64> = (0..u)
        .map(|j| {
            let basket: Vec<usize> = (0..n).filter(|&b| a[j][b]).collect();
            basket.iter().map(|&b| temperature[b]).sum::<f64>() / basket.len() as f64
        })
        .collect();
    (0..n)
        .map(|alpha| {
            let exporters: Vec<usize> = (0..u).filter(|&j| a[j][alpha]).collect();
            if exporters.is_empty() {
                0.0
            } else {
                exporters.iter().map(|&j| country_heat[j]).sum::<f64>() / exporters.len() as f64
            }
        })
        .collect()
}

/// Direct fitness–complexity iteration with plain sums and unit-mean
/// rescaling of both vectors, `iterations` steps from all-ones.
pub fn naive_fitness(s: &BipartiteSnapshot, iterations: usize) -> (Vec<f64>, Vec<f64>) {
    let a = dense(s);
    let (u, n) = (a.len(), s.products().len());
    let exported: Vec<usize> = (0..n).filter(|&p| (0..u).any(|i| a[i][p])).collect();
    let mut f = vec![1.0; u];
    let mut q = vec![1.0; n];
    for _ in 0..iterations {
        let mut f_next: Vec<f64> = (0..u)
            .map(|i| exported.iter().filter(|&&p| a[i][p]).map(|&p| q[p]).sum())
            .collect();
        let mut q_next = vec![0.0; n];
        for &p in &exported {
            let inv: f64 = (0..u).filter(|&i| a[i][p]).map(|i| 1.0 / f[i]).sum();
            q_next[p] = 1.0 / inv;
        }
        let fm = f_next.iter().sum::<f64>() / u as f64;
        f_next.iter_mut().for_each(|x| *x /= fm);
        let qm = exported.iter().map(|&p| q_next[p]).sum::<f64>() / exported.len() as f64;
        q_next.iter_mut().for_each(|x| *x /= qm);
        f = f_next;
        q = q_next;
    }
    let q = exported.iter().map(|&p| q[p]).collect();
    (f, q)
}
