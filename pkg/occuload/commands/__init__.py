from occuload.commands import baseline, evaluate, infer, run, simulate, train, whatif

COMMANDS = (simulate, train, infer, evaluate, baseline, whatif, run)
