//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use pcgeo_core::bitstream::StreamHeader;
use pcgeo_core::gic::{lanczos, Codebook, Image, SaabTransform, PATCH_DIM};
use pcgeo_core::occupancy::{select_mode, OccupancyMode};
use pcgeo_core::pointcloud::{d1_distortion, d2_distortion, estimate_normals, geometry_psnr};
use pcgeo_core::rdo::{solve, DpNode, CHILD_MASK_BITS};
use pcgeo_core::synth::{self, Shape};
use pcgeo_core::{decode, decode_progressive, encode, train_model, CodecConfig, GicModel, PointCloud, PreparedInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = fn(&Shared) -> Outcome;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

struct Shared {
    model: GicModel,
    train_time: Duration,
    shell: PointCloud,
}

fn shared() -> Shared {
    let corpus = synth::training_corpus(1, 12, 9);
    let t = Instant::now();
    let model = train_model(&corpus, &CodecConfig::default()).expect("training the default model");
    Shared {
        model,
        train_time: t.elapsed(),
        shell: synth::sphere_shell(9, 150.0),
    }
}

fn c1_configuration(s: &Shared) -> Outcome {
    let cfg = CodecConfig::default();
    check(cfg.coarsest_side == 32, "coarsest side")?;
    check(cfg.max_level == 3 && cfg.leaf_side(3) == 4 && cfg.min_side == 4, "levels 0..3 with 4³ leaves")?;
    let ladder: Vec<f64> = (0..=3).map(|n| cfg.lambda_at(1.0, n)).collect();
    check(ladder == vec![8.0, 4.6, 2.5, 1.0], format!("ladder {ladder:?}"))?;
    let echo = s.model.config.to_codec();
    check(echo.coarsest_side == 32 && echo.max_level == 3 && echo.multipliers == cfg.multipliers, "model echo")?;
    let e = encode(&synth::sphere_shell(7, 30.0), &s.model, 1.0).map_err(|e| e.to_string())?;
    let (h, _) = StreamHeader::parse(&e.bytes).map_err(|e| e.to_string())?;
    check(h.coarsest_side == 32 && h.max_level == 3, "stream echo geometry")?;
    check(h.multipliers_milli == vec![8000, 4600, 2500, 1000], "stream echo ladder")?;
    Ok("32³ roots, levels 0-3, 4³ leaves, λ_n = (8.0, 4.6, 2.5, 1.0)·λ".into())
}

fn c2_budget(s: &Shared) -> Outcome {
    let params = s.model.parameter_count();
    check(params <= 660_000, format!("{params} parameters"))?;
    check(s.train_time < Duration::from_secs(300), format!("training took {:?}", s.train_time))?;
    Ok(format!("{params} parameters, trained in {:.1}s", s.train_time.as_secs_f64()))
}

fn c3_rate_exactness(s: &Shared) -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..50 {
        let cloud = synth::random_scene(1000 + i, 7);
        let lambda = [0.0, 0.05, 0.5, 5.0, 50.0][rng.random_range(0..5)];
        let e = encode(&cloud, &s.model, lambda).map_err(|e| e.to_string())?;
        let (h, hlen) = StreamHeader::parse(&e.bytes).map_err(|e| e.to_string())?;
        let file_bits = 8 * hlen as u64 + h.payload_bit_count;
        check(e.bytes.len() as u64 == file_bits.div_ceil(8), format!("cloud {i}: padding"))?;
        let predicted = e.stats.predicted_bits();
        check(predicted == file_bits, format!("cloud {i}: predicted {predicted} bits, file {file_bits}"))?;
        let n = cloud.len() as f64;
        check(predicted as f64 / n == file_bits as f64 / n, format!("cloud {i}: bpp"))?;
    }
    let el = t.elapsed();
    check(el < Duration::from_secs(60), format!("took {el:?}"))?;
    Ok(format!("50 clouds, predicted bits == stream bits, {:.1}s", el.as_secs_f64()))
}

fn c4_rd_monotonicity(s: &Shared) -> Outcome {
    let t = Instant::now();
    let prep = PreparedInput::new(&s.shell, &s.model).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for lambda in [0.05, 0.2, 1.0, 5.0, 25.0] {
        let e = prep.encode(lambda).map_err(|e| e.to_string())?;
        let rec = decode(&e.bytes, &s.model).map_err(|e| e.to_string())?;
        let d1 = d1_distortion(&s.shell, &rec).map_err(|e| e.to_string())?;
        rows.push((lambda, e.stats.bpp(), e.stats.distortion_sum, geometry_psnr(d1, 9)));
    }
    for w in rows.windows(2) {
        check(w[1].1 <= w[0].1, format!("bpp rose from λ={} to λ={}: {:?}", w[0].0, w[1].0, rows))?;
        check(w[1].2 >= w[0].2, format!("distortion sum fell from λ={} to λ={}", w[0].0, w[1].0))?;
    }
    let drop = rows[0].3 - rows[4].3;
    check(drop >= 3.0, format!("PSNR drop {drop:.2} dB"))?;
    let el = t.elapsed();
    check(el < Duration::from_secs(120), format!("took {el:?}"))?;
    let bpps: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.1)).collect();
    Ok(format!("bpp [{}], D1 PSNR {:.2} -> {:.2} dB ({drop:.2} dB drop), {:.1}s", bpps.join(", "), rows[0].3, rows[4].3, el.as_secs_f64()))
}

fn c5_lossless(_: &Shared) -> Outcome {
    let plane = synth::rasterize(&[Shape::Plane { axis: 2, offset: 37, lo: [0, 0], hi: [512, 512] }], 9);
    let model = train_model(std::slice::from_ref(&plane), &CodecConfig::default()).map_err(|e| e.to_string())?;
    let e = encode(&plane, &model, 0.05).map_err(|e| e.to_string())?;
    let rec = decode(&e.bytes, &model).map_err(|e| e.to_string())?;
    let d1 = d1_distortion(&plane, &rec).map_err(|e| e.to_string())?;
    check(d1 == 0.0, format!("D1 MSE {d1}"))?;
    check(rec.len() == plane.len(), format!("{} points decoded of {}", rec.len(), plane.len()))?;
    check(rec == plane, "decoded set differs")?;
    Ok(format!("{} points, D1 MSE 0, {:.4} bpp", plane.len(), e.stats.bpp()))
}

// ---- independent oracles for criterion 6 ----

fn mode_oracle(occ: &[bool], s: usize) -> usize {
    let h = s / 2;
    let shapes: [&dyn Fn(usize, usize) -> bool; 9] = [
        &|_, _| true,
        &|c, _| c < h,
        &|c, _| c >= h,
        &|_, r| r < h,
        &|_, r| r >= h,
        &|c, r| c + r < s,
        &|c, r| c + r >= s - 1,
        &|c, r| c >= r,
        &|c, r| c <= r,
    ];
    let mut best = (0, 0);
    for (m, f) in shapes.iter().enumerate() {
        let mut score = 0;
        for r in 0..s {
            for c in 0..s {
                if f(c, r) == occ[r * s + c] {
                    score += 1;
                }
            }
        }
        if m == 0 || score > best.1 {
            best = (m, score);
        }
    }
    best.0
}

fn brute_d1(a: &[[u32; 3]], b: &[[u32; 3]]) -> f64 {
    let d = |p: &[u32; 3], q: &[u32; 3]| (0..3).map(|k| (p[k] as f64 - q[k] as f64).powi(2)).sum::<f64>();
    let dir = |x: &[[u32; 3]], y: &[[u32; 3]]| {
        x.iter().map(|p| y.iter().map(|q| d(p, q)).fold(f64::INFINITY, f64::min)).sum::<f64>() / x.len() as f64
    };
    dir(a, b).max(dir(b, a))
}

fn brute_d2(a: &[[u32; 3]], b: &[[u32; 3]], n: &[[f64; 3]]) -> f64 {
    let d = |p: &[u32; 3], q: &[u32; 3]| (0..3).map(|k| (p[k] as f64 - q[k] as f64).powi(2)).sum::<f64>();
    let proj = |p: &[u32; 3], q: &[u32; 3], nn: &[f64; 3]| {
        (0..3).map(|k| (q[k] as f64 - p[k] as f64) * nn[k]).sum::<f64>().powi(2)
    };
    let nearest = |p: &[u32; 3], set: &[[u32; 3]]| {
        let mut best = 0;
        for (i, q) in set.iter().enumerate() {
            if d(p, q) < d(p, &set[best]) {
                best = i;
            }
        }
        best
    };
    let fwd = a.iter().enumerate().map(|(i, p)| proj(p, &b[nearest(p, b)], &n[i])).sum::<f64>() / a.len() as f64;
    let bwd = b
        .iter()
        .map(|q| {
            let i = nearest(q, a);
            proj(&a[i], q, &n[i])
        })
        .sum::<f64>()
        / b.len() as f64;
    fwd.max(bwd)
}

fn best_pruning(nodes: &[DpNode], root: usize) -> f64 {
    let internal: Vec<usize> = (0..nodes.len()).filter(|&i| !nodes[i].children.is_empty()).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..1 << internal.len() {
        let split = |i: usize| internal.iter().position(|&j| j == i).is_some_and(|k| mask >> k & 1 == 1);
        let mut stack = vec![root];
        let (mut cost, mut ok) = (0.0, true);
        while let Some(i) = stack.pop() {
            let n = &nodes[i];
            if split(i) {
                cost += n.lambda * (n.flag_bits + CHILD_MASK_BITS) as f64;
                stack.extend(&n.children);
            } else if let Some((r, d)) = n.here {
                cost += d + n.lambda * (r + n.flag_bits) as f64;
            } else {
                ok = false;
            }
        }
        if ok {
            best = best.min(cost);
        }
    }
    best
}

/// Cyclic Jacobi eigensolver for symmetric matrices; eigenpairs sorted by
/// descending eigenvalue.
#[allow(clippy::needless_range_loop)]
fn jacobi(mut a: Vec<Vec<f64>>) -> Vec<(f64, Vec<f64>)> {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|k| (a[k][k], (0..n).map(|i| v[i][k]).collect())).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs
}

fn c6_oracles(_: &Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // occupancy modes
    for _ in 0..200 {
        let s = [4, 8, 16][rng.random_range(0..3)];
        let p = rng.random_range(0.05..0.95);
        let occ: Vec<bool> = (0..s * s).map(|_| rng.random_bool(p)).collect();
        let got = select_mode(&occ, s).index() as usize;
        check(got == mode_oracle(&occ, s), format!("mode {got} vs oracle {}", mode_oracle(&occ, s)))?;
    }
    check(OccupancyMode::ALL.len() == 9, "nine modes")?;
    // VQ encode
    for _ in 0..200 {
        let size = 1 << rng.random_range(0..7);
        let cw: Vec<f64> = (0..size * PATCH_DIM).map(|_| rng.random_range(-4i32..4) as f64).collect();
        let cb = Codebook::new(PATCH_DIM, cw.clone());
        let v: Vec<f64> = (0..PATCH_DIM).map(|_| rng.random_range(-4i32..4) as f64).collect();
        let mut best = (0, f64::INFINITY);
        for i in 0..size {
            let d: f64 = (0..PATCH_DIM).map(|k| (cw[i * PATCH_DIM + k] - v[k]).powi(2)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        check(cb.encode(&v) as usize == best.0, "VQ argmin")?;
    }
    // D1 / D2
    for _ in 0..100 {
        let mut pts = |n: usize| -> Vec<[u32; 3]> { (0..n).map(|_| [rng.random_range(0..16), rng.random_range(0..16), rng.random_range(0..16)]).collect() };
        let a = PointCloud::new(pts(40));
        let b = PointCloud::new(pts(30));
        let d1 = d1_distortion(&a, &b).map_err(|e| e.to_string())?;
        check((d1 - brute_d1(a.points(), b.points())).abs() < 1e-12, "D1 vs scan")?;
        let normals = estimate_normals(&a, 6).map_err(|e| e.to_string())?;
        let d2 = d2_distortion(&a, &b, &normals).map_err(|e| e.to_string())?;
        check((d2 - brute_d2(a.points(), b.points(), &normals)).abs() < 1e-9, "D2 vs scan")?;
    }
    // RDO vs exhaustive pruning on trees of up to 9 nodes
    for _ in 0..300 {
        let total = rng.random_range(1..=9usize);
        let mut nodes = vec![DpNode { lambda: 0.0, flag_bits: 1, here: None, children: vec![] }];
        let mut level = vec![0usize];
        while nodes.len() < total {
            let parent = rng.random_range(0..nodes.len());
            if level[parent] == 3 {
                continue;
            }
            let id = nodes.len();
            nodes[parent].children.push(id);
            level.push(level[parent] + 1);
            nodes.push(DpNode { lambda: 0.0, flag_bits: 1, here: None, children: vec![] });
        }
        let lambda = rng.random_range(0.0..2.0);
        let deepest = *level.iter().max().unwrap();
        for (n, &l) in nodes.iter_mut().zip(&level) {
            n.lambda = [8.0, 4.6, 2.5, 1.0][l] * lambda;
            n.flag_bits = u64::from(l < deepest || !n.children.is_empty());
            n.here = (n.children.is_empty() || rng.random_bool(0.85)).then(|| (rng.random_range(8..300), rng.random_range(0.0..200.0)));
        }
        let got = solve(&nodes, &[0])[0].map_or(f64::INFINITY, |c| c.cost);
        let want = best_pruning(&nodes, 0);
        check(got == want || (got - want).abs() < 1e-9, format!("DP {got} vs exhaustive {want}"))?;
    }
    // Saab vs dense eigensolver
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = 200;
        let patches: Vec<f64> = (0..n * PATCH_DIM).map(|i| rng.random_range(-3.0..3.0) + (i % PATCH_DIM) as f64 * 0.2).collect();
        let t = SaabTransform::fit(&patches, PATCH_DIM).map_err(|e| e.to_string())?;
        let mut ac: Vec<Vec<f64>> = patches
            .chunks(PATCH_DIM)
            .map(|p| {
                let m = p.iter().sum::<f64>() / PATCH_DIM as f64;
                p.iter().map(|v| v - m).collect()
            })
            .collect();
        let mean: Vec<f64> = (0..PATCH_DIM).map(|k| ac.iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        ac.iter_mut().for_each(|p| p.iter_mut().zip(&mean).for_each(|(v, m)| *v -= m));
        let cov: Vec<Vec<f64>> = (0..PATCH_DIM)
            .map(|i| (0..PATCH_DIM).map(|j| ac.iter().map(|p| p[i] * p[j]).sum::<f64>() / n as f64).collect())
            .collect();
        let pairs = jacobi(cov);
        for k in 1..PATCH_DIM {
            let (val, vec) = &pairs[k - 1];
            worst = worst.max((t.eigenvalues()[k] - val).abs());
            let dot: f64 = t.kernel(k).iter().zip(vec).map(|(a, b)| a * b).sum();
            check(dot.abs() > 1.0 - 1e-6, format!("kernel {k} misaligned ({dot})"))?;
        }
    }
    check(worst < 1e-6, format!("eigenvalue error {worst:e}"))?;
    Ok(format!("modes 200, VQ 200, D1/D2 100, RDO 300, Saab 100 instances (max eigenvalue error {worst:.1e})"))
}

fn c7_numerics(s: &Shared) -> Outcome {
    let mut worst: f64 = 0.0;
    for unit in s.model.units() {
        for level in &unit.levels {
            worst = worst.max(level.saab.orthonormality_error());
        }
    }
    check(worst < 1e-9, format!("orthonormality error {worst:e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let c = rng.random_range(-50.0..50.0);
        let (r, w) = (4 << rng.random_range(1..4), 4 << rng.random_range(1..4));
        let down = lanczos::downsample(&Image::filled(r, w, c)).map_err(|e| e.to_string())?;
        let up = lanczos::upsample(&Image::filled(r, w, c));
        check(down.data.iter().chain(&up.data).all(|v| (v - c).abs() < 1e-9), "constant not preserved")?;
    }
    // encoder/decoder drift on every coder and on a whole stream
    let mut streams = 0;
    for unit in s.model.units() {
        let (rows, cols) = unit.finest_dims();
        for _ in 0..20 {
            let side = unit.key.side as i32;
            let img = Image::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1..=side) as f64).collect());
            let code = unit.encode(&img).map_err(|e| e.to_string())?;
            let dec = unit.decode(&code.indices).map_err(|e| e.to_string())?;
            let same = dec.data.iter().zip(&code.reconstruction.data).all(|(a, b)| a.to_bits() == b.to_bits());
            check(same, format!("drift in {}", unit.key))?;
            streams += 1;
        }
    }
    let cloud = synth::sphere_shell(8, 70.0);
    let prep = PreparedInput::new(&cloud, &s.model).map_err(|e| e.to_string())?;
    let plan = prep.plan(1.0).map_err(|e| e.to_string())?;
    let e = prep.encode(1.0).map_err(|e| e.to_string())?;
    let dec = decode(&e.bytes, &s.model).map_err(|e| e.to_string())?;
    check(dec == prep.reconstruction(&plan).map_err(|e| e.to_string())?, "stream decode differs from encoder state")?;
    Ok(format!("max |KᵀK−I| {worst:.1e}, Lanczos constants exact, 0 drift over {streams} index streams + 1 full stream"))
}

fn c8_determinism(s: &Shared) -> Outcome {
    let cloud = synth::random_scene(8, 8);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| encode(&cloud, &s.model, 0.5).map(|e| e.bytes))
    };
    let a = run(1).map_err(|e| e.to_string())?;
    let b = run(4).map_err(|e| e.to_string())?;
    let c = run(4).map_err(|e| e.to_string())?;
    check(a == b && b == c, "streams differ across runs or thread counts")?;
    let small_cfg = CodecConfig { codebook_sizes: vec![16, 4, 2, 1], ..CodecConfig::default() };
    let corpus = synth::training_corpus(2, 2, 7);
    let model_a = train_model(&corpus, &small_cfg).map_err(|e| e.to_string())?;
    let model_b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| train_model(&corpus, &small_cfg))
        .map_err(|e| e.to_string())?;
    check(model_a.to_bytes() == model_b.to_bytes(), "model files differ across thread counts")?;

    let small = synth::sphere_shell(6, 20.0);
    let base = encode(&small, &s.model, 0.5).map_err(|e| e.to_string())?.bytes;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut errors, mut decoded, mut panics) = (0, 0, 0);
    for i in 0..10_000 {
        let mut m = base.clone();
        match i % 4 {
            0 | 1 => {
                for _ in 0..rng.random_range(1..=3) {
                    let bit = rng.random_range(0..m.len() * 8);
                    m[bit / 8] ^= 0x80 >> (bit % 8);
                }
            }
            2 => m.truncate(rng.random_range(0..m.len())),
            _ => {
                let at = rng.random_range(0..m.len());
                m[at] = rng.random();
                if rng.random_bool(0.3) {
                    m.extend((0..rng.random_range(1..8)).map(|_| rng.random::<u8>()));
                }
            }
        }
        match catch_unwind(AssertUnwindSafe(|| decode(&m, &s.model))) {
            Ok(Ok(_)) => decoded += 1,
            Ok(Err(_)) => errors += 1,
            Err(_) => panics += 1,
        }
    }
    check(panics == 0, format!("{panics} mutations panicked"))?;
    Ok(format!("identical bytes for 1/4 threads; 10000 mutations: {errors} errors, {decoded} decodes, 0 panics"))
}

fn c9_progressive(s: &Shared) -> Outcome {
    let e = encode(&s.shell, &s.model, 1.0).map_err(|e| e.to_string())?;
    let mut mses = Vec::new();
    for k in 0..=3 {
        let rec = decode_progressive(&e.bytes, &s.model, k).map_err(|e| e.to_string())?;
        mses.push(d1_distortion(&s.shell, &rec).map_err(|e| e.to_string())?);
    }
    let full = decode(&e.bytes, &s.model).map_err(|e| e.to_string())?;
    check(d1_distortion(&s.shell, &full).map_err(|e| e.to_string())? == mses[3], "k = 3 equals full decode")?;
    check(mses.windows(2).all(|w| w[1] <= w[0]), format!("D1 by level {mses:?}"))?;
    let txt: Vec<String> = mses.iter().map(|m| format!("{m:.3}")).collect();
    Ok(format!("D1 MSE by level [{}], leaves {:?}", txt.join(", "), e.stats.leaves_per_level))
}

fn main() {
    let t = Instant::now();
    let s = shared();
    let criteria: [(&str, Criterion); 9] = [
        ("1 configuration fidelity", c1_configuration),
        ("2 model budget", c2_budget),
        ("3 rate-model exactness", c3_rate_exactness),
        ("4 RD monotonicity", c4_rd_monotonicity),
        ("5 lossless path", c5_lossless),
        ("6 oracle equivalences", c6_oracles),
        ("7 numerical invariants", c7_numerics),
        ("8 determinism and robustness", c8_determinism),
        ("9 progressivity", c9_progressive),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&s))).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} of 9 criteria passed in {:.1}s", 9 - failed, t.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
