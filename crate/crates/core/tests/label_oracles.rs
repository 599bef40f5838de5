use mapseg::data::{LabelMap, Palette};
use mapseg::postprocess::mode_filter;
use mapseg::reference::{mode_filter_histogram, voronoi_labels};
use mapseg::synthmap::{generate, SeedPoint, SynthSpec};
use proptest::prelude::*;

fn label_maps(classes: u8) -> impl Strategy<Value = LabelMap> {
    (1usize..20, 1usize..20).prop_flat_map(move |(w, h)| {
        prop::collection::vec(0u8..classes, w * h).prop_map(move |l| LabelMap::new(w, h, l).unwrap())
    })
}

proptest! {
    #[test]
    fn mode_filter_matches_histogram(l in label_maps(5), r in 1usize..4) {
        let k = 2 * r + 1;
        prop_assert_eq!(mode_filter(&l, k).unwrap(), mode_filter_histogram(&l, k).unwrap());
    }

    #[test]
    fn mode_filter_with_few_classes(l in label_maps(2)) {
        prop_assert_eq!(mode_filter(&l, 3).unwrap(), mode_filter_histogram(&l, 3).unwrap());
    }

    #[test]
    fn voronoi_matches_brute_force(seed in any::<u64>(), regions in 1usize..12, w in 16usize..48, h in 16usize..48) {
        let palette = Palette::default_classes(11).unwrap();
        let spec = SynthSpec { width: w, height: h, num_regions: regions, seed, ..SynthSpec::default() };
        let s = generate(&spec, &palette).unwrap();
        prop_assert_eq!(s.labels, voronoi_labels(&s.seeds, w, h).unwrap());
    }
}

#[test]
fn voronoi_ties_with_duplicate_and_equidistant_seeds() {
    let seeds = [
        SeedPoint { x: 4, y: 4, class: 3 },
        SeedPoint { x: 4, y: 4, class: 7 },
        SeedPoint { x: 12, y: 4, class: 1 },
        SeedPoint { x: 8, y: 12, class: 2 },
    ];
    let l = voronoi_labels(&seeds, 16, 16).unwrap();
    assert_eq!(l.get(8, 4), 3);
    assert_eq!(l.histogram(8)[7], 0);
    let regions = mapseg::synthmap::voronoi_regions(&seeds, 16, 16);
    let via_regions: Vec<u8> = regions.iter().map(|&r| seeds[r as usize].class).collect();
    assert_eq!(via_regions, l.labels());
}
