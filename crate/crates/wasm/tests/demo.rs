use quantwave::grid::Modality;
use quantwave_wasm::demo::{InversionDemo, WaveDemo};

#[test]
fn wavefield_frames_and_traces() {
    let d = WaveDemo::new(Modality::Acoustic, (40.0, 40.0), 8.0, 0).unwrap();
    assert_eq!(d.frame(0).len(), d.n_x * d.n_z);
    assert_eq!(d.channel_data().len(), d.n_t * d.n_c);
    assert!(d.peak > 0.0);
    assert!(d.cfl.contains("<="));
    // trace c is the field at element c
    let (x, z) = d.elements[3];
    let t = d.n_t / 2;
    assert_eq!(d.channel_data()[t * d.n_c + 3], d.frame(t)[x * d.n_z + z]);
    assert!(WaveDemo::new(Modality::Acoustic, (40.0, 40.0), 8.0, 99).is_err());
}

#[test]
fn radar_wavefield() {
    let d = WaveDemo::new(Modality::Em, (25.0, 25.0), 4.0, 2).unwrap();
    assert_eq!((d.n_x, d.n_z, d.n_t, d.n_c), (50, 50, 800, 8));
}

#[test]
fn inversion_steps_lower_the_loss() {
    let mut inv = InversionDemo::new((20.0, 18.0), 5.0, 0.06, 3).unwrap();
    let l0 = inv.loss();
    let e0 = inv.nrmse();
    while !inv.finished() {
        inv.step().unwrap();
    }
    assert!(inv.loss() < l0);
    assert!(inv.nrmse() < e0);
    assert_eq!(inv.sound_speed().len(), 1600);
    assert!(inv.step().is_err());
}
