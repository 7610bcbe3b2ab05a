use palquant::netmodel::*;

#[test]
fn specs_round_trip_through_files() {
    let dir = std::env::temp_dir().join(format!("palquant-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for arch in [Arch::ResNet18, Arch::ResNet34, Arch::Plain18] {
        let base = build_network(arch);
        for spec in [
            base.clone(),
            annotate_uniform(&base, 6, 3).unwrap(),
            palquant_transform(&base, 2, 3).unwrap(),
            palquant_transform_with(
                &base,
                3,
                2,
                PalQuantOptions {
                    cyclic_shuffle: CyclicShufflePlacement::StageStartsUnpermuted,
                    channel_shuffle: ChannelShufflePlacement::PerBlock,
                },
            )
            .unwrap(),
        ] {
            let path = dir.join(format!("{}-{}.json", spec.name, spec.layers.len()));
            save_spec(&spec, &path).unwrap();
            let back = load_spec(&path).unwrap();
            assert_eq!(back, spec);
            assert_eq!(bitops(&back).unwrap(), bitops(&spec).unwrap());
        }
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn invalid_files_report_their_problems() {
    let mut spec = palquant_transform(&build_network(Arch::ResNet18), 2, 2).unwrap();
    let i = spec.layers.iter().position(|l| l.name == "s2.b0.conv1").unwrap();
    spec.layers[i].conv.as_mut().unwrap().groups = 1;
    let path = std::env::temp_dir().join(format!("palquant-bad-{}.json", std::process::id()));
    save_spec(&spec, &path).unwrap();
    let err = load_spec(&path).unwrap_err().to_string();
    std::fs::remove_file(&path).unwrap();
    assert!(err.contains("s2.b0.conv1"), "{err}");
    assert!(NetworkSpec::from_json("{\"name\": 3}").is_err());
}

#[test]
fn ungrouped_layers_of_the_transform() {
    let base = build_network(Arch::ResNet18);
    for g in 2..=4 {
        let spec = palquant_transform(&base, 2, g).unwrap();
        let stem = spec.layer_by_name("stem").unwrap().conv.unwrap();
        assert_eq!((stem.in_channels, stem.out_channels, stem.groups), (3, 64 * g, 1));
        let fc = spec.layer_by_name("fc").unwrap().conv.unwrap();
        assert_eq!((fc.in_channels, fc.out_channels), (512 * g, 1000));
        let cyclic = spec.layers.iter().filter(|l| l.kind == LayerKind::CyclicShuffle).count();
        assert_eq!(cyclic, 3);
    }
}
