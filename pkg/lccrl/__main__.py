"""Main

This file handles receiving the user input and then kicking off the requested stage of the pipeline: synthetic
data generation, pre-training, fine-tuning, labelling, evaluation, the data-size sweep, cross-validation and
gradient checks.
"""
import argparse
import codecs
import csv
import json
import logging
import os
import sys

from lccrl import checkpoint
from lccrl import configuration
from lccrl import corpus as corpus_io
from lccrl import experiments
from lccrl import gradient_check
from lccrl import labeler
from lccrl import lccrl_model
from lccrl import metrics
from lccrl import report
from lccrl import synthetic
from lccrl import trainer
from lccrl.errors import ValidationError
from lccrl.label_set import LabelSet
from lccrl.vocabulary import build_vocab
from lccrl.word_vectors import load_word_vectors


log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

MODEL_FLAGS = {'word_dim': 'word_dim', 'speaker_dim': 'speaker_dim', 'hidden': 'hidden',
               'encoder_layers': 'encoder_layers', 'context_layers': 'context_layers', 'dropout': 'dropout',
               'precision': 'precision'}
TRAINING_FLAGS = {'batch': 'batch_size', 'epochs': 'max_epochs', 'patience': 'patience',
                  'heldout': 'heldout_fraction', 'lr': 'learning_rate', 'restarts': 'num_restarts',
                  'seed': 'seed'}


class UsageErrorParser(argparse.ArgumentParser):
    """
    Reports bad flags with the usage text and exit code 1.
    """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, "{0}: error: {1}\n".format(self.prog, message))


def build_parser() -> argparse.ArgumentParser:
    parser = UsageErrorParser(prog='lccrl', description="Conversation pre-training and scene labelling.")
    parser.add_argument('-v', dest='verbose', action='store_true', help="Enable verbose logging")
    parser.add_argument('--config', dest='config', type=str, default=None, help="JSON configuration file")
    parser.add_argument('--seed', dest='seed', type=int, default=None, help="Seed for all randomness")
    parser.add_argument('--preset', dest='preset', type=str, default='desk',
                        choices=sorted(configuration.PRESETS), help="Model size preset")

    seed_flag = UsageErrorParser(add_help=False)
    seed_flag.add_argument('--seed', dest='seed', type=int, default=argparse.SUPPRESS,
                           help="Seed for all randomness")

    model_flags = UsageErrorParser(add_help=False)
    model_flags.add_argument('--word-dim', dest='word_dim', type=int, default=None)
    model_flags.add_argument('--speaker-dim', dest='speaker_dim', type=int, default=None)
    model_flags.add_argument('--hidden', dest='hidden', type=int, default=None)
    model_flags.add_argument('--encoder-layers', dest='encoder_layers', type=int, default=None)
    model_flags.add_argument('--context-layers', dest='context_layers', type=int, default=None)
    model_flags.add_argument('--dropout', dest='dropout', type=float, default=None)
    model_flags.add_argument('--precision', dest='precision', type=str, default=None,
                             choices=['float64', 'float32'])

    training_flags = UsageErrorParser(add_help=False)
    training_flags.add_argument('--batch', dest='batch', type=int, default=None,
                                help="Conversations per mini-batch")
    training_flags.add_argument('--epochs', dest='epochs', type=int, default=None)
    training_flags.add_argument('--patience', dest='patience', type=int, default=None)
    training_flags.add_argument('--heldout', dest='heldout', type=float, default=None,
                                help="Fraction of the data kept for early stopping")
    training_flags.add_argument('--lr', dest='lr', type=float, default=None)
    training_flags.add_argument('--restarts', dest='restarts', type=int, default=None)
    training_flags.add_argument('--freeze-word-vectors', dest='freeze_word_vectors', action='store_true')
    training_flags.add_argument('--curve', dest='curve', type=str, default=None, help="Write the loss curve CSV")

    labeler_flags = UsageErrorParser(add_help=False)
    labeler_flags.add_argument('--labels', dest='labels', type=str, default=None,
                               help="Comma separated label names, C1..C5 by default")
    labeler_flags.add_argument('--speaker-blind', dest='speaker_blind', action='store_true')
    labeler_flags.add_argument('--freeze-shared', dest='freeze_shared', action='store_true')
    labeler_flags.add_argument('--allow-vocab-mismatch', dest='allow_vocab_mismatch', action='store_true')
    labeler_flags.add_argument('--min-count', dest='min_count', type=int, default=2)

    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen-synth', parents=[seed_flag], help="Generate a synthetic labeled corpus")
    gen.add_argument('--out', dest='out', type=str, required=True)
    gen.add_argument('--num', dest='num', type=int, default=100)
    gen.add_argument('--spec', dest='spec', type=str, default='default', choices=sorted(synthetic.SCENE_SPECS))
    gen.add_argument('--unlabeled', dest='unlabeled', action='store_true', help="Drop the scene labels")
    gen.set_defaults(handler=run_gen_synth)

    pre = commands.add_parser('pretrain', parents=[seed_flag, model_flags, training_flags],
                              help="Pre-train the encoders")
    pre.add_argument('--data', dest='data', type=str, required=True)
    pre.add_argument('--out', dest='out', type=str, required=True)
    pre.add_argument('--word-vectors', dest='word_vectors', type=str, default=None)
    pre.add_argument('--min-count', dest='min_count', type=int, default=2)
    pre.set_defaults(handler=run_pretrain)

    fine = commands.add_parser('finetune', parents=[seed_flag, model_flags, training_flags, labeler_flags],
                               help="Train the scene labeller")
    fine.add_argument('--data', dest='data', type=str, required=True)
    fine.add_argument('--out', dest='out', type=str, required=True)
    fine.add_argument('--init', dest='init', type=str, default=None, help="Pre-trained checkpoint")
    fine.set_defaults(handler=run_finetune)

    lab = commands.add_parser('label', parents=[seed_flag], help="Label conversations with a trained labeller")
    lab.add_argument('--model', dest='model', type=str, required=True)
    lab.add_argument('--data', dest='data', type=str, required=True)
    lab.add_argument('--out', dest='out', type=str, required=True)
    lab.add_argument('--posteriors', dest='posteriors', action='store_true',
                     help="Include per-utterance label probabilities")
    lab.set_defaults(handler=run_label)

    ev = commands.add_parser('eval', parents=[seed_flag], help="Score predicted labels against gold labels")
    ev.add_argument('--pred', dest='pred', type=str, default=None)
    ev.add_argument('--gold', dest='gold', type=str, default=None)
    ev.add_argument('--model', dest='model', type=str, default=None)
    ev.add_argument('--data', dest='data', type=str, default=None)
    ev.add_argument('--labels', dest='labels', type=str, default=None)
    ev.add_argument('--csv', dest='csv', type=str, default=None)
    ev.add_argument('--json', dest='json', type=str, default=None)
    ev.add_argument('--html', dest='html', type=str, default=None)
    ev.set_defaults(handler=run_eval)

    sweep = commands.add_parser('sweep', parents=[seed_flag, model_flags, training_flags, labeler_flags],
                                help="Accuracy against labeled data size")
    sweep.add_argument('--train', dest='train', type=str, required=True)
    sweep.add_argument('--test', dest='test', type=str, required=True)
    sweep.add_argument('--init', dest='init', type=str, default=None)
    sweep.add_argument('--fractions', dest='fractions', type=str, default='0.1,0.25,0.5,1.0')
    sweep.add_argument('--seeds', dest='seeds', type=str, default='0')
    sweep.add_argument('--out', dest='out', type=str, required=True)
    sweep.set_defaults(handler=run_sweep)

    cross = commands.add_parser('crossval', parents=[seed_flag, model_flags, training_flags, labeler_flags],
                                help="Leave-one-business-type-out evaluation")
    cross.add_argument('--data', dest='data', type=str, required=True)
    cross.add_argument('--init', dest='init', type=str, default=None)
    cross.add_argument('--out', dest='out', type=str, default=None)
    cross.set_defaults(handler=run_crossval)

    grad = commands.add_parser('gradcheck', parents=[seed_flag],
                               help="Compare analytic and numerical gradients")
    grad.add_argument('--model', dest='model', type=str, default='lccrl', choices=gradient_check.CHECKS)
    grad.add_argument('--epsilon', dest='epsilon', type=float, default=1e-5)
    grad.set_defaults(handler=run_gradcheck)
    return parser


def _overrides(args, flags: dict) -> dict:
    return {field: getattr(args, flag, None) for flag, field in flags.items()}


def _file_values(args) -> dict:
    if args.config is None:
        return {'model': {}, 'training': {}}
    return configuration.load_config_file(args.config)


def model_config_from(args, base=None) -> configuration.ModelConfiguration:
    overrides = _overrides(args, MODEL_FLAGS)
    if getattr(args, 'speaker_blind', False):
        overrides['speaker_blind'] = True
    return configuration.build_model_config(args.preset, _file_values(args)['model'], overrides, base)


def training_config_from(args) -> configuration.TrainingConfiguration:
    overrides = _overrides(args, TRAINING_FLAGS)
    for flag in ('freeze_shared', 'freeze_word_vectors'):
        if getattr(args, flag, False):
            overrides[flag] = True
    return configuration.build_training_config(_file_values(args)['training'], overrides)


def _label_set(args) -> LabelSet:
    return LabelSet.parse(args.labels) if getattr(args, 'labels', None) else LabelSet()


def _parse_list(text: str, convert) -> list:
    try:
        return [convert(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise ValidationError("cannot parse the list '{0}'".format(text))


def _pretrained(args, corpus: list) -> tuple:
    """
    The pre-trained checkpoint (or None), its model configuration and the vocabulary to train with.
    """
    if args.init is None:
        return None, model_config_from(args), build_vocab(corpus, args.min_count)
    saved = checkpoint.load_checkpoint(args.init)
    base, vocab = checkpoint.read_model_metadata(saved, lccrl_model.MODEL_KIND)
    if args.allow_vocab_mismatch:
        vocab = build_vocab(corpus, args.min_count)
    return saved, model_config_from(args, base), vocab


def run_gen_synth(args) -> int:
    config = synthetic.SyntheticConfiguration(args.num, args.seed or 0, synthetic.SCENE_SPECS[args.spec]())
    corpus = synthetic.generate_synthetic(config)
    if args.unlabeled:
        corpus = corpus_io.strip_labels(corpus)
    corpus_io.write_jsonl(corpus, args.out)
    print("Wrote {0} conversations to {1}".format(len(corpus), args.out))
    return EXIT_OK


def run_pretrain(args) -> int:
    corpus = corpus_io.parse_jsonl(args.data)
    model_config = model_config_from(args)
    train_config = training_config_from(args)
    vocab = build_vocab(corpus, args.min_count)
    model = lccrl_model.LcCrlModel.create(model_config, vocab, train_config.seed)
    word_vectors = load_word_vectors(args.word_vectors, vocab) if args.word_vectors else None
    result = lccrl_model.pretrain(model, corpus, train_config, word_vectors)
    result.model.save(args.out)
    if args.curve:
        trainer.write_curve_csv(result.curve, args.curve)
    print("Pre-trained for {0} epochs; best held-out NLL {1:.4f}; checkpoint {2}".format(
        len(result.curve), result.best_heldout_nll, args.out))
    return EXIT_OK


def run_finetune(args) -> int:
    corpus = corpus_io.require_labels(corpus_io.parse_jsonl(args.data))
    saved, model_config, vocab = _pretrained(args, corpus)
    train_config = training_config_from(args)
    model = labeler.SceneLabeler.create(model_config, vocab, _label_set(args), train_config.seed)
    result = labeler.finetune(model, corpus, train_config, saved, args.allow_vocab_mismatch)
    result.model.save(args.out)
    if args.curve:
        trainer.write_curve_csv(result.curve, args.curve)
    print("Fine-tuned for {0} epochs; best held-out NLL {1:.4f}; model {2}".format(
        len(result.curve), result.best_heldout_nll, args.out))
    return EXIT_OK


def run_label(args) -> int:
    model = labeler.SceneLabeler.load(args.model)
    corpus = corpus_io.parse_jsonl(args.data)
    with codecs.open(args.out, 'w', 'utf-8') as out_file:
        for conversation in corpus:
            record = corpus_io.conversation_to_dict(conversation._replace(labels=model.label(conversation)))
            if args.posteriors:
                record['posteriors'] = model.posteriors(conversation).tolist()
            out_file.write(json.dumps(record, ensure_ascii=False) + '\n')
    print("Labelled {0} conversations into {1}".format(len(corpus), args.out))
    return EXIT_OK


def _predictions_and_gold(args) -> tuple:
    if args.pred and args.gold:
        predicted = corpus_io.require_labels(corpus_io.parse_jsonl(args.pred))
        gold = corpus_io.require_labels(corpus_io.parse_jsonl(args.gold))
        if [c.id for c in predicted] != [c.id for c in gold]:
            raise ValidationError("prediction and gold files hold different conversations")
        return [c.labels for c in predicted], [c.labels for c in gold], _label_set(args)
    if args.model and args.data:
        model = labeler.SceneLabeler.load(args.model)
        gold = corpus_io.require_labels(corpus_io.parse_jsonl(args.data))
        return experiments.predict_corpus(model, gold), [c.labels for c in gold], model.label_set
    raise ValidationError("eval needs either --pred and --gold or --model and --data")


def run_eval(args) -> int:
    predictions, gold, label_set = _predictions_and_gold(args)
    scores = metrics.evaluate(predictions, gold, label_set)
    if args.csv:
        metrics.write_metrics_csv(scores, args.csv)
    if args.json:
        metrics.write_metrics_json(scores, args.json)
    if args.html:
        report.write_html(scores, args.html)
    print(report.render_markdown(scores))
    return EXIT_OK


def run_sweep(args) -> int:
    train = corpus_io.require_labels(corpus_io.parse_jsonl(args.train))
    test = corpus_io.require_labels(corpus_io.parse_jsonl(args.test))
    saved, model_config, vocab = _pretrained(args, train)
    rows = experiments.data_size_sweep(train, test, _parse_list(args.fractions, float), model_config,
                                       training_config_from(args), vocab, saved, _parse_list(args.seeds, int),
                                       _label_set(args))
    experiments.write_sweep_csv(rows, args.out)
    for summary in experiments.summarize_sweep(rows):
        print("fraction {0}: {1} init, mean accuracy {2:.1f} over {3} runs".format(
            summary.fraction, summary.variant, summary.mean_accuracy, summary.runs))
    return EXIT_OK


def run_crossval(args) -> int:
    corpus = corpus_io.require_labels(corpus_io.parse_jsonl(args.data))
    if args.init is None:
        saved, model_config, vocab = None, model_config_from(args), None
    else:
        saved, model_config, vocab = _pretrained(args, corpus)
    result = experiments.domain_cross_validation(corpus, model_config, training_config_from(args), vocab, saved,
                                                 _label_set(args), args.min_count)
    if args.out:
        with codecs.open(args.out, 'w', 'utf-8') as out_file:
            writer = csv.writer(out_file, lineterminator='\n')
            writer.writerow(['domain', 'accuracy', 'macro_f', 'utterances'])
            for domain, scores in list(result.per_domain.items()) + [('pooled', result.pooled)]:
                writer.writerow([domain, '{0:.4f}'.format(scores.accuracy), '{0:.4f}'.format(scores.macro_f),
                                 scores.total])
    for domain, scores in result.per_domain.items():
        print("{0}: accuracy {1:.1f}".format(domain, scores.accuracy))
    print(report.render_markdown(result.pooled, "Pooled cross-validation results"))
    return EXIT_OK


def run_gradcheck(args) -> int:
    results = gradient_check.run_checks(args.model, args.seed or 0, args.epsilon)
    for name, error in results.items():
        print("{0}: max relative error {1:.3e}".format(name, error))
    worst = max(results.values())
    print("max relative error {0:.3e}".format(worst))
    return EXIT_OK if worst <= gradient_check.TOLERANCE else EXIT_RUNTIME


def main(argv: list = None) -> int:
    """
    Parse the user input, then run the requested command.

    :param argv: Command-line arguments without the program name; sys.argv when None
    :return: 0 on success, 1 for invalid input, 2 for a runtime failure
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as stop:
        return stop.code if isinstance(stop.code, int) else EXIT_VALIDATION
    setup_logger(args.verbose)
    try:
        return args.handler(args)
    except ValidationError as error:
        log.error("Invalid input: {0}".format(error))
        return EXIT_VALIDATION
    except Exception as error:
        log.error("{0} failed: {1}".format(args.command, error), exc_info=args.verbose)
        return EXIT_RUNTIME


def setup_logger(is_debug: bool) -> None:
    """
    Setup the logger to either info mode or debug mode based on the user configuration.

    :param is_debug: Whether to run in debug or info mode
    """
    mode = "INFO"
    if is_debug:
        mode = "DEBUG"
    logging.basicConfig(level=os.environ.get("LOGLEVEL", mode))


if __name__ == '__main__':
    sys.exit(main())
