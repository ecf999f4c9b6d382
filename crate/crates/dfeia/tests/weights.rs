use dfeia::weights::{self, WeightsError};
use dfeia_core::{ParamStore, Tensor};
use proptest::prelude::*;

fn store_strategy() -> impl Strategy<Value = ParamStore<f32>> {
    let tensor = prop::collection::vec(1usize..4, 0..4).prop_flat_map(|shape| {
        let n = shape.iter().product::<usize>();
        (Just(shape), prop::collection::vec(any::<f32>(), n))
    });
    prop::collection::vec(("[a-z]{1,6}(\\.[a-z0-9_]{1,6}){0,3}", tensor), 1..6).prop_map(|entries| {
        let mut store = ParamStore::new();
        for (name, (shape, data)) in entries {
            // duplicate names from the generator are skipped
            let _ = store.register(name, Tensor::new(&shape, data).unwrap());
        }
        store
    })
}

fn bits(store: &ParamStore<f32>) -> Vec<(String, Vec<usize>, Vec<u32>)> {
    store
        .iter()
        .map(|p| (p.name.clone(), p.value.shape().to_vec(), p.value.data().iter().map(|v| v.to_bits()).collect()))
        .collect()
}

proptest! {
    #[test]
    fn round_trip_is_bit_exact(store in store_strategy()) {
        let bytes = weights::encode(&store).unwrap();
        let mut target = store.clone();
        for p in target.iter_mut() {
            p.value.fill(0.0);
        }
        weights::apply(&mut target, weights::decode(&bytes).unwrap()).unwrap();
        prop_assert_eq!(bits(&target), bits(&store));
        prop_assert_eq!(weights::encode(&target).unwrap(), bytes);
    }

    #[test]
    fn every_truncation_is_an_end_of_file_error(store in store_strategy(), frac in 0.0f64..1.0) {
        let bytes = weights::encode(&store).unwrap();
        let cut = ((bytes.len() as f64) * frac) as usize;
        prop_assume!(cut >= 8 && cut < bytes.len());
        prop_assert!(matches!(weights::decode(&bytes[..cut]), Err(WeightsError::UnexpectedEof(_))));
    }
}
