use proptest::prelude::*;

use zsoftmax::data::AttributeMatrix;
use zsoftmax::numeric::argmax;
use zsoftmax::softlabel::{
    build_table, seen_unseen_similarity, soft_label_du, soft_label_nu, unseen_entropy, SoftLabelConfig,
    SoftLabelMode,
};

fn attrs_strategy() -> impl Strategy<Value = AttributeMatrix> {
    (1usize..6, 1usize..5, 1usize..6).prop_flat_map(|(cs, cu, a)| {
        prop::collection::vec(prop::collection::vec(-2.0f64..2.0, a), cs + cu)
            .prop_map(move |rows| AttributeMatrix::new(&rows[..cs], &rows[cs..]).unwrap())
    })
}

proptest! {
    #[test]
    fn rows_are_distributions(attrs in attrs_strategy(), q in 0.0f64..1.0, tau in 0.01f64..10.0) {
        for mode in [SoftLabelMode::Nearest, SoftLabelMode::Distribution] {
            let table = build_table(&attrs, &SoftLabelConfig::new(mode, q, tau).unwrap()).unwrap();
            for k in 0..attrs.num_seen() {
                let row = table.row(k);
                prop_assert!(row.iter().all(|&v| v >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let unseen: f64 = row[attrs.num_seen()..].iter().sum();
                prop_assert!((unseen - q).abs() < 1e-12);
                prop_assert!((row[k] - (1.0 - q)).abs() < 1e-15);
                for (j, &v) in row[..attrs.num_seen()].iter().enumerate() {
                    if j != k {
                        prop_assert_eq!(v, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn nearest_mode_hits_most_similar(attrs in attrs_strategy(), q in 0.01f64..1.0) {
        let sims = seen_unseen_similarity(&attrs);
        for k in 0..attrs.num_seen() {
            let row = soft_label_nu(k, &attrs, q).unwrap();
            let target = attrs.num_seen() + argmax(sims.row(k)).unwrap();
            prop_assert_eq!(row[target], q);
        }
    }

    #[test]
    fn du_preserves_similarity_order(attrs in attrs_strategy(), q in 0.01f64..1.0, tau in 0.05f64..5.0) {
        let sims = seen_unseen_similarity(&attrs);
        let cs = attrs.num_seen();
        for k in 0..cs {
            let row = soft_label_du(k, &attrs, q, tau).unwrap();
            let s = sims.row(k);
            for i in 0..s.len() {
                for j in 0..s.len() {
                    if s[i] > s[j] {
                        prop_assert!(row[cs + i] >= row[cs + j]);
                    }
                }
            }
        }
    }

    #[test]
    fn entropy_grows_with_temperature(attrs in attrs_strategy(), q in 0.05f64..1.0) {
        for k in 0..attrs.num_seen() {
            let mut last = -1.0;
            for tau in [0.01, 0.1, 1.0, 10.0] {
                let h = unseen_entropy(&soft_label_du(k, &attrs, q, tau).unwrap(), attrs.num_seen()).unwrap();
                prop_assert!(h >= last - 1e-12);
                last = h;
            }
            prop_assert!(last <= (attrs.num_unseen() as f64).ln() + 1e-12);
        }
    }
}

#[test]
fn q_zero_is_one_hot() {
    let attrs = AttributeMatrix::new(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![1.0, 1.0]]).unwrap();
    for mode in [SoftLabelMode::Nearest, SoftLabelMode::Distribution] {
        let table = build_table(&attrs, &SoftLabelConfig::new(mode, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(table.row(0), [1.0, 0.0, 0.0]);
        assert_eq!(table.row(1), [0.0, 1.0, 0.0]);
    }
}

#[test]
fn invalid_parameters_rejected() {
    for (q, tau) in [(-0.1, 1.0), (1.5, 1.0), (0.3, 0.0), (0.3, -1.0), (f64::NAN, 1.0)] {
        assert!(SoftLabelConfig::new(SoftLabelMode::Distribution, q, tau).is_err(), "q={q} tau={tau}");
    }
}
