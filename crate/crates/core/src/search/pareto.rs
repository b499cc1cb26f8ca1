use super::SearchError;

/// `a` dominates `b` under two-objective minimization.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Indices of the nondominated points, in input order. Exact duplicates of a
/// nondominated point are all kept.
pub fn pareto_filter(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .0
            .total_cmp(&points[j].0)
            .then(points[i].1.total_cmp(&points[j].1))
    });
    // Sweep by g ascending; a point survives iff its f is below every f seen at
    // strictly smaller g, or it ties the current best point exactly.
    let mut keep = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for i in order {
        let p = points[i];
        let survives = match best {
            None => true,
            Some(b) => p == b || p.1 < b.1,
        };
        if survives {
            keep.push(i);
            if best.is_none_or(|b| p.1 < b.1) {
                best = Some(p);
            }
        }
    }
    keep.sort_unstable();
    keep
}

/// Area dominated by `front` inside the box bounded by `reference`.
pub fn hypervolume(front: &[(f64, f64)], reference: (f64, f64)) -> Result<f64, SearchError> {
    if let Some(&(g, f)) = front.iter().find(|&&(g, f)| !(g <= reference.0 && f <= reference.1)) {
        return Err(SearchError::PointOutsideReference { point: (g, f), reference });
    }
    let mut pts = front.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut ceiling = reference.1;
    for (g, f) in pts {
        if f < ceiling {
            area += (reference.0 - g) * (ceiling - f);
            ceiling = f;
        }
    }
    Ok(area)
}
