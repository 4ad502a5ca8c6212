"""Character-level adversarial text generation toolkit.

Two discrimination modes share one set of networks and losses: ``textkd``
feeds the critic softened autoencoder reconstructions of real text, and
``iwgan`` feeds it the raw one-hot sequences. A quantitative evaluation
suite (BLEU-N without brevity penalty, n-gram Jensen-Shannon divergence),
a finite-difference gradient auditor, and a geometric separability
diagnostic round out the package.
"""

from .autoencoder import (
    SequenceAutoencoder,
    ae_train_step,
    init_ae_params,
    reconstruction_accuracy,
    reconstruction_loss,
)
from .config import TrainConfig, format_config, parse_config, validate_config
from .corpus import (
    BatchStream,
    Vocabulary,
    batches,
    build_vocab,
    encode,
    encode_corpus,
    load_corpus,
    load_vocab,
    one_hot,
    save_vocab,
)
from .diagnostics import (
    AuditConfig,
    AuditReport,
    SeparabilityConfig,
    SeparabilityReport,
    grad_audit,
    identical_distribution_control,
    softened_bayes_accuracy,
    two_word_experiment,
)
from .evaluation import (
    MetricReport,
    bleu_n,
    decode_text,
    evaluate,
    evaluate_checkpoint,
    generate_samples,
    ngram_jsd,
)
from .gan import (
    Critic,
    Generator,
    critic_loss,
    critic_score,
    generator_loss,
    gradient_penalty,
    init_gan_params,
    interpolate,
    sample_noise,
)
from .optim import Adam
from .training import (
    TrainState,
    init_state,
    load_state,
    save_state,
    train,
    train_iteration,
)

__version__ = "0.1.0"
