//! Generators for format round-trip tests.
#![allow(dead_code)]

use openpatch_core::bank::{BankMetadata, ClassMemoryBank, GlobalBank, GlobalEmbedding, PatchEmbedding};
use openpatch_core::{ClassId, Label, SampleEmbeddingSet, UnifiedBank};
use proptest::prelude::*;

/// Finite floats, including signed zeros and subnormals.
pub fn value() -> impl Strategy<Value = f32> {
    prop::num::f32::NORMAL | prop::num::f32::SUBNORMAL | prop::num::f32::ZERO | prop::num::f32::NEGATIVE
}

fn floats(n: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(value(), n)
}

pub fn embedding_sets() -> impl Strategy<Value = Vec<SampleEmbeddingSet>> {
    (1usize..7, any::<bool>(), prop::option::of(1usize..5)).prop_flat_map(|(dim, anchors, global)| {
        let sample = (any::<u64>(), -1i32..4, 1usize..6).prop_flat_map(move |(id, label, p)| {
            (
                Just(id),
                Just(label),
                prop::collection::vec(floats(dim), p),
                prop::collection::vec(floats(3), p),
                floats(global.unwrap_or(0)),
            )
                .prop_map(move |(id, label, rows, anchor_rows, g)| {
                    let patches = rows
                        .into_iter()
                        .zip(anchor_rows)
                        .enumerate()
                        .map(|(k, (row, a))| {
                            let p = PatchEmbedding::new(id, k as u32, row);
                            if anchors {
                                p.with_anchor([a[0], a[1], a[2]])
                            } else {
                                p
                            }
                        })
                        .collect();
                    let label = Label::from_code(label).unwrap();
                    SampleEmbeddingSet::new(id, label, patches, global.map(|_| g)).unwrap()
                })
        });
        prop::collection::vec(sample, 1..8)
    })
}

pub fn banks() -> impl Strategy<Value = UnifiedBank> {
    (1usize..6, 1usize..4, any::<bool>()).prop_flat_map(|(dim, classes, anchors)| {
        let class = move |c: usize| {
            prop::collection::vec((any::<u64>(), floats(dim), floats(3)), 1..8).prop_map(move |rows| {
                let patches = rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (sid, v, a))| {
                        let p = PatchEmbedding::new(sid, (c * 1000 + i) as u32, v);
                        if anchors {
                            p.with_anchor([a[0], a[1], a[2]])
                        } else {
                            p
                        }
                    })
                    .collect();
                ClassMemoryBank::new(ClassId(c as u32), patches).unwrap()
            })
        };
        let banks: Vec<_> = (0..classes).map(class).collect();
        let metadata = prop::collection::btree_map("[a-z_]{1,12}", "\\PC{0,16}", 0..5);
        let global = prop::collection::vec((any::<u64>(), 0..classes as u32, floats(dim)), 1..5);
        (banks, metadata, prop::option::of(global)).prop_map(
            |(banks, metadata, globals): (_, BankMetadata, _)| {
                let globals = globals.map(|g: Vec<(u64, u32, Vec<f32>)>| {
                    GlobalBank::new(
                        g.into_iter()
                            .map(|(sample_id, c, values)| GlobalEmbedding { sample_id, class_id: ClassId(c), values })
                            .collect(),
                    )
                    .unwrap()
                });
                UnifiedBank::new(banks, metadata, globals).unwrap()
            },
        )
    })
}
