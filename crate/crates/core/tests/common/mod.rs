//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use geojson::{FeatureCollection, GeoJson, Geometry};

use hoodmine::boundaries::{connected_groups, find_boundaries, BoundaryParams, BoundaryResult};
use hoodmine::features::{compute_features, FeaturesConfig};
use hoodmine::geo::{CellIndex, CityGrid, GeoPoint, PlanarPoint};
use hoodmine::homogeneity::{h_index_map, HIndexMap, HIndexParams, SimilarityMeasure};
use hoodmine::hotspots::{build_hotspots, vectorize_cells, venue_points, CellVectorField, HotspotParams, SparseVector};
use hoodmine::synth::{generate, SynthCity, SynthSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Brute-force DBSCAN returning clusters as sorted member lists, noise
/// dropped, border points attached to the first cluster that reaches them.
pub fn dbscan(points: &[PlanarPoint], eps: f64, min_pts: usize) -> BTreeSet<Vec<usize>> {
    let n = points.len();
    let nbrs: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| points[i].distance(&points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = nbrs.iter().map(|v| v.len() >= min_pts).collect();
    let mut label = vec![usize::MAX; n];
    let mut clusters = Vec::new();
    for i in 0..n {
        if !core[i] || label[i] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![i];
        label[i] = id;
        let mut queue = vec![i];
        while let Some(p) = queue.pop() {
            if !core[p] {
                continue;
            }
            for &q in &nbrs[p] {
                if label[q] == usize::MAX {
                    label[q] = id;
                    members.push(q);
                    queue.push(q);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters.into_iter().collect()
}

/// Uniform points in discs of `radius` around each center.
pub fn blobs(rng: &mut ChaCha8Rng, centers: &[(f64, f64)], per_blob: usize, radius: f64) -> Vec<PlanarPoint> {
    let mut pts = Vec::new();
    for &(cx, cy) in centers {
        for _ in 0..per_blob {
            let r = radius * rng.random::<f64>().sqrt();
            let t = rng.random::<f64>() * std::f64::consts::TAU;
            pts.push(PlanarPoint::new(cx + r * t.cos(), cy + r * t.sin()));
        }
    }
    pts
}

fn cross(o: &PlanarPoint, a: &PlanarPoint, b: &PlanarPoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Hull vertices by checking every ordered pair as a candidate edge: `i→j`
/// is a hull edge when no point lies to its right and every collinear point
/// lies on the segment. O(n³).
pub fn brute_hull(points: &[PlanarPoint]) -> BTreeSet<(u64, u64)> {
    let mut out = BTreeSet::new();
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate() {
            if i == j || (a.x == b.x && a.y == b.y) {
                continue;
            }
            let edge = points.iter().all(|p| {
                let c = cross(a, b, p);
                if c < 0.0 {
                    return false;
                }
                if c > 0.0 {
                    return true;
                }
                let t = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
                t >= 0.0 && t <= a.distance_sq(b)
            });
            if edge {
                out.insert(key(a));
                out.insert(key(b));
            }
        }
    }
    out
}

pub fn key(p: &PlanarPoint) -> (u64, u64) {
    (p.x.to_bits(), p.y.to_bits())
}

/// Connected components by union-find over 4-neighbors, each sorted,
/// ordered by smallest member.
pub fn union_find_groups(cells: &[CellIndex]) -> Vec<Vec<CellIndex>> {
    let set: BTreeSet<CellIndex> = cells.iter().copied().collect();
    let list: Vec<CellIndex> = set.iter().copied().collect();
    let pos: BTreeMap<CellIndex, usize> = list.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut parent: Vec<usize> = (0..list.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, c) in list.iter().enumerate() {
        for n in [CellIndex::new(c.row + 1, c.col), CellIndex::new(c.row, c.col + 1)] {
            if let Some(&j) = pos.get(&n) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<CellIndex>> = BTreeMap::new();
    for i in 0..list.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(list[i]);
    }
    let mut out: Vec<Vec<CellIndex>> = groups.into_values().collect();
    for g in &mut out {
        g.sort();
    }
    out.sort_by_key(|g| g[0]);
    out
}

pub fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn dense_jaccard(a: &[f64], b: &[f64]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x > 0.0 && **y > 0.0).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x > 0.0 || **y > 0.0).count();
    if union == 0 || inter == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// H_Index of one cell by summing over every cell of the grid.
pub fn direct_h_index(
    dense: &[Vec<f64>],
    n_rows: u32,
    n_cols: u32,
    cell_size: f64,
    cell: (u32, u32),
    radius: f64,
    sim: fn(&[f64], &[f64]) -> f64,
    weight_normalized: bool,
) -> f64 {
    let sigma = radius / 2.0;
    let (mut num, mut wsum, mut count) = (0.0, 0.0, 0usize);
    let p = (cell.0 * n_cols + cell.1) as usize;
    for r in 0..n_rows {
        for c in 0..n_cols {
            if (r, c) == cell {
                continue;
            }
            let dy = (r as f64 - cell.0 as f64) * cell_size;
            let dx = (c as f64 - cell.1 as f64) * cell_size;
            let d2 = dx * dx + dy * dy;
            if d2.sqrt() > radius {
                continue;
            }
            let w = (-d2 / (2.0 * sigma * sigma)).exp();
            let q = (r * n_cols + c) as usize;
            num += sim(&dense[p], &dense[q]) * w;
            wsum += w;
            count += 1;
        }
    }
    match (count, weight_normalized) {
        (0, _) => 0.0,
        (_, true) => num / wsum,
        (_, false) => num / count as f64,
    }
}

pub fn field_from_dense(n_rows: u32, n_cols: u32, dense: &[Vec<f64>]) -> CellVectorField {
    CellVectorField {
        n_rows,
        n_cols,
        dim: dense.first().map_or(0, Vec::len),
        vectors: dense.iter().map(|v| SparseVector::from_dense(v)).collect(),
    }
}

pub fn square_grid(n_rows: u32, n_cols: u32) -> CityGrid {
    let sw = GeoPoint::new(40.70, -74.02).unwrap();
    CityGrid::from_extent(sw, n_cols as f64 * 100.0, n_rows as f64 * 100.0, 100.0).unwrap()
}

/// Five planted discs of radius 400..800 m on a 7 km × 5 km city, each 70%
/// one dominant category, 2000 check-ins per disc, users themed by home disc.
pub fn five_disc_spec(seed: u64, purity: f64) -> SynthSpec {
    let cats = [
        ("bar", "nightlife"),
        ("chinese_restaurant", "food"),
        ("art_gallery", "art"),
        ("office", "work"),
        ("park", "green"),
    ];
    let others = ["coffee_shop", "italian_restaurant", "museum", "sushi_restaurant", "jazz_club"];
    let centers = [[1200.0, 1200.0], [3600.0, 1200.0], [6000.0, 1300.0], [1800.0, 3800.0], [4800.0, 3900.0]];
    let radii = [400.0, 500.0, 600.0, 700.0, 800.0];
    let hours = [22.0, 19.0, 15.0, 10.0, 13.0];
    let discs: Vec<serde_json::Value> = (0..5)
        .map(|i| {
            serde_json::json!({
                "name": cats[i].1,
                "center_m": centers[i],
                "radius_m": radii[i],
                "venues": (150.0 * (radii[i] / 400.0f64).powi(2)) as usize,
                "mix": [
                    {"category_id": cats[i].0, "share": purity},
                    {"category_id": others[i], "share": 1.0 - purity}
                ],
                "checkins": 2000,
                "peak_hour": hours[i],
                "tourist_share": 0.2,
                "residents": 60,
                "theme": [cats[i].1, format!("{}x", cats[i].1), format!("{}y", cats[i].1)]
            })
        })
        .collect();
    serde_json::from_value(serde_json::json!({
        "seed": seed,
        "origin": {"lat": 40.70, "lon": -74.02},
        "width_m": 7000.0,
        "height_m": 5000.0,
        "discs": discs,
        "tourists": 50,
        "profile_purity": 0.8
    }))
    .unwrap()
}

pub fn dominant_categories() -> [&'static str; 5] {
    ["bar", "chinese_restaurant", "art_gallery", "office", "park"]
}

/// A generated city carried through detection with default parameters.
pub struct Detected {
    pub city: SynthCity,
    pub grid: CityGrid,
    pub points: Vec<PlanarPoint>,
    pub boundaries: BoundaryResult,
}

pub fn detect(spec: &SynthSpec, hindex: &HIndexParams) -> Detected {
    let city = generate(spec).unwrap();
    let grid = spec.grid().unwrap();
    let features = compute_features(&city.dataset, &city.labels, &FeaturesConfig::default()).unwrap();
    let points = venue_points(&city.dataset, &grid).unwrap();
    let hotspots = build_hotspots(&features.catalog, &points, &HotspotParams::default());
    let field = vectorize_cells(&hotspots, &grid, features.catalog.dim());
    let map = h_index_map(&field, &grid, hindex).unwrap();
    let boundaries = find_boundaries(&map, &grid, &BoundaryParams::default()).unwrap();
    Detected {
        city,
        grid,
        points,
        boundaries,
    }
}

pub fn binary_cosine(a: &[f64], b: &[f64]) -> f64 {
    let bin = |v: &[f64]| v.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect::<Vec<_>>();
    dense_cosine(&bin(a), &bin(b))
}

pub fn intersect(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| **x > 0.0 && **y > 0.0).count() as f64
}

pub fn oracle_for(m: SimilarityMeasure) -> fn(&[f64], &[f64]) -> f64 {
    match m {
        SimilarityMeasure::DensityCosine => dense_cosine,
        SimilarityMeasure::BinaryCosine => binary_cosine,
        SimilarityMeasure::Jaccard => dense_jaccard,
        SimilarityMeasure::Intersect => intersect,
    }
}

pub fn three_by_three() -> Vec<Vec<f64>> {
    let mut dense = vec![vec![0.0; 6]; 9];
    dense[4] = vec![20.0, 0.0, 5.0, 0.0, 1.5, 0.0];
    dense[1] = vec![10.0, 0.0, 5.0, 0.0, 0.0, 0.0];
    dense[5] = vec![0.0, 3.0, 5.0, 0.0, 7.0, 2.0];
    dense[0] = vec![4.0, 4.0, 4.0, 4.0, 4.0, 4.0];
    dense[8] = vec![0.0, 0.0, 0.0, 9.0, 0.0, 0.0];
    dense
}

pub fn random_field(rng: &mut ChaCha8Rng, side: usize, dim: usize, density: f64) -> Vec<Vec<f64>> {
    (0..side * side)
        .map(|_| {
            (0..dim)
                .map(|_| if rng.random::<f64>() < density { rng.random_range(0.5..30.0) } else { 0.0 })
                .collect()
        })
        .collect()
}

pub fn map(n_rows: u32, n_cols: u32, values: Vec<f64>) -> HIndexMap {
    HIndexMap::from_values(n_rows, n_cols, values, &HIndexParams::default())
}

/// Smooth-ish random map: a few Gaussian bumps plus noise, clamped to [0, 1].
pub fn bumpy(rng: &mut ChaCha8Rng, n: u32) -> Vec<f64> {
    let bumps: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(1..8))
        .map(|_| {
            (
                rng.random_range(0.0..n as f64),
                rng.random_range(0.0..n as f64),
                rng.random_range(1.0..6.0),
                rng.random_range(0.3..1.0),
            )
        })
        .collect();
    let noise = rng.random_range(0.0..0.2);
    (0..n * n)
        .map(|i| {
            let (r, c) = ((i / n) as f64, (i % n) as f64);
            let v: f64 = bumps
                .iter()
                .map(|&(br, bc, s, h)| h * (-((r - br).powi(2) + (c - bc).powi(2)) / (2.0 * s * s)).exp())
                .sum();
            (v + noise * rng.random::<f64>()).clamp(0.0, 1.0)
        })
        .collect()
}

pub fn check_invariants(m: &HIndexMap, grid: &CityGrid, params: &BoundaryParams, result: &BoundaryResult) {
    let mut seen = BTreeSet::new();
    for (i, n) in result.neighborhoods.iter().enumerate() {
        assert_eq!(n.id as usize, i);
        assert!(params.min < n.cells.len() && n.cells.len() < params.max, "size {}", n.cells.len());
        assert_eq!(connected_groups(&n.cells).len(), 1, "neighborhood {i} is not 4-connected");
        for &c in &n.cells {
            assert!(seen.insert(c), "cell {c:?} in two neighborhoods");
            assert!(m.get(c) > n.threshold, "member below its acceptance threshold");
        }
        assert!((n.area_km2 - n.cells.len() as f64 * grid.cell_area_km2()).abs() < 1e-9);
    }
    let residual: BTreeSet<CellIndex> = result.residual.iter().copied().collect();
    assert!(residual.is_disjoint(&seen));
    assert_eq!(residual.len() + seen.len(), m.len());
    for w in result.neighborhoods.windows(2) {
        assert!(w[0].threshold <= w[1].threshold);
    }
}

pub fn plateau(n: u32, cells: &[(u32, u32)], value: f64) -> HIndexMap {
    let mut values = vec![0.0; (n * n) as usize];
    for &(r, c) in cells {
        values[(r * n + c) as usize] = value;
    }
    map(n, n, values)
}

pub fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub fn signed_area(ring: &[Vec<f64>]) -> f64 {
    ring.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum::<f64>() / 2.0
}

/// Structural RFC 7946 checks on top of a parse by the `geojson` crate.
pub fn validate_geojson(path: &Path) -> usize {
    let text = std::fs::read_to_string(path).unwrap();
    let fc: FeatureCollection = match text.parse::<GeoJson>().unwrap() {
        GeoJson::FeatureCollection(fc) => fc,
        other => panic!("{}: expected a FeatureCollection, got {other:?}", path.display()),
    };
    for f in &fc.features {
        let Geometry { value, .. } = f.geometry.as_ref().expect("feature has a geometry");
        let geojson::Value::Polygon(rings) = value else {
            panic!("{}: expected a Polygon", path.display());
        };
        assert_eq!(rings.len(), 1);
        let ring = &rings[0];
        assert!(ring.len() >= 4, "ring needs at least four positions");
        assert_eq!(ring.first(), ring.last(), "ring must be closed");
        assert!(signed_area(ring) > 0.0, "exterior ring must be counter-clockwise");
        for p in ring {
            assert_eq!(p.len(), 2);
            assert!((-180.0..=180.0).contains(&p[0]) && (-90.0..=90.0).contains(&p[1]));
        }
        assert!(f.properties.is_some());
    }
    fc.features.len()
}

