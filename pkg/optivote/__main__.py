from optivote.cli import main

raise SystemExit(main())
