//! Crew travel times from straight-line geometry.
//!
//! Road distance is approximated as twice the straight-line distance between
//! task sites, and travel time is that distance divided by the crew speed.

/// Straight-line distance in meters.
pub fn euclidean(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Travel minutes between two sites (meters) at `speed_kmh`.
pub fn travel_minutes(a: [f64; 2], b: [f64; 2], speed_kmh: f64) -> f64 {
    let road_km = 2.0 * euclidean(a, b) / 1000.0;
    road_km / speed_kmh * 60.0
}

/// Full symmetric travel-time matrix over `sites` (minutes).
pub fn build_travel_matrix(sites: &[[f64; 2]], speed_kmh: f64) -> Vec<Vec<f64>> {
    sites
        .iter()
        .map(|&a| sites.iter().map(|&b| travel_minutes(a, b, speed_kmh)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_km_at_walking_pace_is_fifty_minutes() {
        let t = travel_minutes([0.0, 0.0], [2083.0, 0.0], 5.0);
        // 2 * 2.083 km / 5 km/h = 0.8332 h
        assert!((t - 49.992).abs() < 1e-9);
        assert!((t - 50.0).abs() < 0.01);
    }

    #[test]
    fn coincident_points_are_free() {
        assert_eq!(travel_minutes([3.0, 4.0], [3.0, 4.0], 5.0), 0.0);
    }

    #[test]
    fn triangle_matrix_is_symmetric_with_zero_diagonal() {
        let m = build_travel_matrix(&[[0.0, 0.0], [300.0, 0.0], [0.0, 400.0]], 5.0);
        for i in 0..3 {
            assert_eq!(m[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
        // 500 m hypotenuse: 1 km of road at 5 km/h
        assert!((m[1][2] - 12.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn matrix_is_symmetric_nonnegative_and_scales_with_speed(
            pts in prop::collection::vec((-5000.0f64..5000.0, -5000.0f64..5000.0), 1..6),
            speed in 0.5f64..60.0,
            k in 0.25f64..8.0,
        ) {
            let sites: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
            let m = build_travel_matrix(&sites, speed);
            let fast = build_travel_matrix(&sites, speed * k);
            for i in 0..sites.len() {
                for j in 0..sites.len() {
                    prop_assert!(m[i][j] >= 0.0);
                    prop_assert_eq!(m[i][j], m[j][i]);
                    prop_assert!((fast[i][j] - m[i][j] / k).abs() <= 1e-9 * (1.0 + m[i][j]));
                }
            }
        }
    }
}
