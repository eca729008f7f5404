"""Hybrid text/image/scene-graph misinformation classifier.

Subpackage map:

    autodiff    reverse-mode automatic differentiation over float64 arrays
    optim       Adam with decoupled-style additive weight decay
    rng         keyed deterministic random streams
    encoder     tokenizer, vocabulary, image patches, transformer encoder
    scenegraph  scene-graph model, validation, canonical JSON
    fusion      three cross-modal scene-graph fusion algorithms
    wordvec     word-vector tables and node featurization
    node2vec    biased random walks + skip-gram embeddings
    gcn         two-layer graph convolution encoders
    model       end-to-end classifier, training loop, metrics
    explain     Shapley-value feature attribution
    synth       synthetic planted-signal corpus generator
    data        manifest parsing and eager dataset loading
    experiment  run configs, output directories, reloading
    checkpoint  binary weight container
    cli         command-line harness
"""

__version__ = "0.1.0"
